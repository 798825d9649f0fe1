"""Seeded synthetic corpora in the three raw dataset layouts.

The generators write directory trees that load_sgd/load_ketod/load_bitod can
read, with realistic annotation shapes (frames, service calls and results,
knowledge-enrichment keys, BiToD events). Two presets ship:

* ``small``  — a few dozen dialogs; fast unit-test corpora.
* ``reference`` — split sizes and turn counts chosen so corpus statistics land
  on the published per-dataset numbers (SGD train 16,142 dialogs / 16
  domains / avg 20.44 turns; KETOD 5,324 / 13 / 9.78; English BiToD
  3,689 / 5 / 9.39), with dev/test adding four more SGD domains so the
  full corpus reaches 20.

Everything is driven by one seeded RNG per dataset, so a (preset, seed)
pair always writes byte-identical trees.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .corpus import base_domain

_CITIES = [
    "San Jose", "Fresno", "Seattle", "New York", "Chicago",
    "Austin", "Denver", "Portland",
]
_DATES = ["March 1st", "next Friday", "tomorrow", "the 11th", "April 3rd"]
_TIMES = ["11:30 am", "7 pm", "6:15 pm", "noon", "8:45 pm"]
_ADJ = ["Golden", "Blue", "Urban", "Royal", "Sunny", "Grand"]
_NOUN = ["Table", "Garden", "Corner", "Palace", "House", "Spot"]
_PRICES = ["cheap", "moderate", "expensive"]
_RATINGS = ["3.5", "4.0", "4.5", "5.0"]

_SGD_TRAIN_DOMAINS = [
    "Banks", "Buses", "Calendar", "Events", "Flights", "Homes", "Hotels",
    "Media", "Movies", "Music", "RentalCars", "Restaurants", "RideSharing",
    "Services", "Travel", "Weather",
]
_SGD_DEV_EXTRA = ["Alarm"]
_SGD_TEST_EXTRA = ["Messaging", "Payment", "Trains"]
_TWO_VARIANT = {"Restaurants", "Hotels", "Events", "Movies"}
_KETOD_DOMAINS = _SGD_TRAIN_DOMAINS[:13]
_BITOD_DOMAINS = ["hotels", "restaurants", "attractions", "weather", "metro"]

# (dialogs, dialogs-with-one-extra-pair) per split.
PRESETS: dict[str, dict] = {
    "small": {
        "sgd": {"train": (16, 4), "dev": (4, 0), "test": (4, 0)},
        "ketod": {"train": (8, 4), "dev": (2, 0), "test": (2, 1)},
        "bitod": {"train": (6, 2), "valid": (2, 0), "test": (2, 1), "zh": 2},
    },
    "reference": {
        # train: 16142*20 + 3551*2 turns -> avg 20.4400 over the train split
        "sgd": {"train": (16142, 3551), "dev": (120, 0), "test": (160, 0)},
        # 5324*8 + 4738*2 = 52068 turns -> avg 9.7795
        "ketod": {"train": (4247, 4247), "dev": (545, 491), "test": (532, 0)},
        # 3689*8 + 2564*2 = 34640 turns -> avg 9.3895
        "bitod": {"train": (2952, 2564), "valid": (295, 0), "test": (442, 0), "zh": 12},
    },
}


def _name_slot(base: str) -> str:
    return f"{base.lower()}_name"


def _sgd_service(base: str, variant: int) -> dict:
    name_slot = _name_slot(base)
    return {
        "service_name": f"{base}_{variant}",
        "description": f"Search and reservation service for {base.lower()}",
        "slots": [
            {"name": name_slot, "description": f"Name of the {base.lower()} option",
             "is_categorical": False, "possible_values": []},
            {"name": "city", "description": "City where the search happens",
             "is_categorical": False, "possible_values": []},
            {"name": "date", "description": "Date of the booking",
             "is_categorical": False, "possible_values": []},
            {"name": "time", "description": "Time of the booking",
             "is_categorical": False, "possible_values": []},
            {"name": "price_range", "description": "Price bucket of the option",
             "is_categorical": True, "possible_values": _PRICES},
            {"name": "rating", "description": "Average user rating",
             "is_categorical": True, "possible_values": _RATINGS},
        ],
        "intents": [
            {"name": f"Find{base}",
             "description": f"Search for a {base.lower()} option",
             "required_slots": ["city"],
             "optional_slots": {"price_range": "dontcare", "rating": "dontcare"}},
            {"name": f"Reserve{base}",
             "description": f"Reserve a {base.lower()} option",
             "required_slots": [name_slot, "city", "date", "time"],
             "optional_slots": {}},
        ],
    }


def _sgd_services_for(domains: list[str]) -> list[str]:
    services = []
    for base in domains:
        n = 2 if base in _TWO_VARIANT else 1
        services.extend(f"{base}_{v}" for v in range(1, n + 1))
    return services


def _user_turn(service: str, intent: str, utterance: str,
               slot_values: dict | None = None) -> dict:
    state = {"active_intent": intent, "slot_values": slot_values or {}}
    return {
        "speaker": "USER",
        "utterance": utterance,
        "frames": [{"service": service, "state": state, "actions": []}],
    }


def _system_turn(service: str, utterance: str, actions: list[dict],
                 call: dict | None = None, results: list[dict] | None = None) -> dict:
    frame: dict = {"service": service, "actions": actions}
    if call is not None:
        frame["service_call"] = call
        frame["service_results"] = results or []
    return {"speaker": "SYSTEM", "utterance": utterance, "frames": [frame]}


def _sgd_dialog_turns(rng: random.Random, services: list[str], n_pairs: int) -> list[dict]:
    svc = services[0]
    base = base_domain(svc)
    name_slot = _name_slot(base)
    city = rng.choice(_CITIES)
    date = rng.choice(_DATES)
    time = rng.choice(_TIMES)
    venue = f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}"
    alt_venue = f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}"
    price = rng.choice(_PRICES)
    rating = rng.choice(_RATINGS)
    results = [
        {name_slot: venue, "city": city, "price_range": price, "rating": rating},
        {name_slot: alt_venue, "city": city, "price_range": rng.choice(_PRICES),
         "rating": rng.choice(_RATINGS)},
    ]
    turns: list[dict] = []

    def switch(i: int) -> bool:
        return len(services) > 1 and i == 2

    for i in range(n_pairs):
        if i == 0:
            turns.append(_user_turn(
                svc, f"Find{base}",
                f"I am looking for a {base.lower()} option in town."))
            turns.append(_system_turn(
                svc, "Which city should I search in?",
                [{"act": "REQUEST", "slot": "city", "values": []}]))
        elif i == 1:
            turns.append(_user_turn(
                svc, f"Find{base}", f"Please search in {city}.",
                {"city": [city]}))
            turns.append(_system_turn(
                svc,
                f"I found 2 options. How about {venue}? It has a {rating} rating.",
                [{"act": "INFORM_COUNT", "slot": "count", "values": ["2"]},
                 {"act": "OFFER", "slot": name_slot, "values": [venue]},
                 {"act": "INFORM", "slot": "rating", "values": [rating]}],
                call={"method": f"Find{base}", "parameters": {"city": city}},
                results=results))
        elif switch(i):
            svc = services[1]
            base = base_domain(svc)
            name_slot = _name_slot(base)
            venue = f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}"
            turns.append(_user_turn(
                svc, f"Find{base}",
                f"I also need a {base.lower()} option in {city}."))
            turns.append(_system_turn(
                svc, "Sure. Which date do you prefer?",
                [{"act": "REQUEST", "slot": "date", "values": []}]))
        elif i == n_pairs - 2 and n_pairs >= 5:
            turns.append(_user_turn(
                svc, f"Reserve{base}",
                f"Sounds good, please book it for {date} at {time}.",
                {"date": [date], "time": [time]}))
            turns.append(_system_turn(
                svc, "Your booking is confirmed. Enjoy!",
                [{"act": "NOTIFY_SUCCESS", "slot": "", "values": []}],
                call={"method": f"Reserve{base}",
                      "parameters": {name_slot: venue, "city": city,
                                     "date": date, "time": time}},
                results=[{name_slot: venue, "date": date, "time": time}]))
        elif i == n_pairs - 1:
            turns.append(_user_turn(
                svc, "NONE", "Thanks, that is all I need."))
            turns.append(_system_turn(
                svc, "Have a wonderful day!",
                [{"act": "GOODBYE", "slot": "", "values": []}]))
        else:
            kind = rng.randrange(3)
            if kind == 0:
                turns.append(_user_turn(svc, f"Find{base}",
                                        "What is their price range?"))
                turns.append(_system_turn(
                    svc, f"It is {price} priced.",
                    [{"act": "INFORM", "slot": "price_range", "values": [price]}]))
            elif kind == 1:
                turns.append(_user_turn(svc, f"Find{base}",
                                        "Do they have availability at that time?"))
                turns.append(_system_turn(
                    svc, f"Yes, {time} is open. Shall I book it?",
                    [{"act": "CONFIRM", "slot": "time", "values": [time]}]))
            else:
                turns.append(_user_turn(svc, f"Find{base}",
                                        "Is there anything cheaper nearby?"))
                turns.append(_system_turn(
                    svc, f"There is also {alt_venue}, which is {rng.choice(_PRICES)}.",
                    [{"act": "OFFER", "slot": name_slot, "values": [alt_venue]}]))
    return turns


def _pick_services(rng: random.Random, pool: list[str]) -> list[str]:
    if len(pool) > 1 and rng.random() < 0.25:
        return rng.sample(pool, 2)
    return [rng.choice(pool)]


def make_sgd(root: str | Path, preset: str = "small", seed: int = 13) -> Path:
    cfg = PRESETS[preset]["sgd"]
    rng = random.Random(seed)
    root = Path(root)
    split_domains = {
        "train": _SGD_TRAIN_DOMAINS,
        "dev": _SGD_DEV_EXTRA + _SGD_TRAIN_DOMAINS[:6],
        "test": _SGD_TEST_EXTRA + _SGD_TRAIN_DOMAINS[6:12],
    }
    for split, (n_dialogs, n_extra) in cfg.items():
        split_dir = root / split
        split_dir.mkdir(parents=True, exist_ok=True)
        services = _sgd_services_for(split_domains[split])
        schema = [
            _sgd_service(base_domain(s), int(s.rsplit("_", 1)[1])) for s in services
        ]
        (split_dir / "schema.json").write_text(json.dumps(schema, indent=1))
        chunk: list[dict] = []
        file_no = 1
        for i in range(n_dialogs):
            n_pairs = 11 if i < n_extra else 10
            dialog_services = _pick_services(rng, services)
            chunk.append({
                "dialogue_id": f"{split[:2]}_{i:05d}",
                "services": dialog_services,
                "turns": _sgd_dialog_turns(rng, dialog_services, n_pairs),
            })
            if len(chunk) == 256 or i == n_dialogs - 1:
                out = split_dir / f"dialogues_{file_no:03d}.json"
                out.write_text(json.dumps(chunk))
                chunk = []
                file_no += 1
    return root


def make_ketod(root: str | Path, preset: str = "small", seed: int = 17) -> Path:
    cfg = PRESETS[preset]["ketod"]
    rng = random.Random(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    services = [f"{d}_1" for d in _KETOD_DOMAINS]
    schema = [_sgd_service(d, 1) for d in _KETOD_DOMAINS]
    (root / "schema.json").write_text(json.dumps(schema, indent=1))
    for split, (n_dialogs, n_extra) in cfg.items():
        dialogs = []
        for i in range(n_dialogs):
            n_pairs = 5 if i < n_extra else 4
            dialog_services = _pick_services(rng, services)
            turns = _sgd_dialog_turns(rng, dialog_services, n_pairs)
            # Enrich one plain system response with a knowledge snippet; the
            # published data keeps both the original and enriched utterances.
            if rng.random() < 0.6:
                for turn in turns:
                    frame = turn["frames"][0]
                    named = [a for a in frame["actions"]
                             if a["slot"].endswith("_name") and a["values"]]
                    if (turn["speaker"] == "SYSTEM" and "service_call" not in frame
                            and named):
                        entity = named[0]["values"][0]
                        snippet = f"{entity} is a well known local favorite."
                        turn["enrich"] = True
                        turn["entity_query"] = [entity]
                        turn["kg_snippets_text"] = [snippet]
                        turn["enriched_utter"] = f"{turn['utterance']} {snippet}"
                        break
            dialogs.append({
                "dialogue_id": f"kt_{split[:2]}_{i:05d}",
                "services": dialog_services,
                "turns": turns,
            })
        (root / f"{split}.json").write_text(json.dumps(dialogs))
    return root


def _bitod_ontology() -> dict:
    intents = {}
    for domain in _BITOD_DOMAINS:
        slots = {
            "name": {"description": f"Name of the {domain} option", "values": []},
            "city": {"description": "City to search in", "values": []},
            "date": {"description": "Date of the booking", "values": []},
            "time": {"description": "Time of the booking", "values": []},
            "price_range": {"description": "Price bucket", "values": _PRICES},
        }
        intents[f"{domain}_search"] = {"domain": domain, "slots": slots}
        intents[f"{domain}_booking"] = {"domain": domain, "slots": slots}
    return {"intents": intents}


def _bitod_events(rng: random.Random, domains: list[str], n_pairs: int,
                  chinese: bool = False) -> list[dict]:
    domain = domains[0]
    city = rng.choice(_CITIES)
    date = rng.choice(_DATES)
    venue = f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}"
    price = rng.choice(_PRICES)
    items = [{"name": venue, "city": city, "price_range": price},
             {"name": f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}", "city": city,
              "price_range": rng.choice(_PRICES)}]

    def text(en: str, zh: str) -> str:
        return zh if chinese else en

    events: list[dict] = []
    for i in range(n_pairs):
        if i == 0:
            events.append({
                "Agent": "User", "active_intent": f"{domain}_search",
                "Actions": [{"act": "inform", "slot": "city", "value": city}],
                "Text": text(f"I want to find a {domain} option in {city}.",
                             "我想找一个合适的地方。")})
            events.append({
                "Agent": "Wizard",
                "Actions": [{"act": "request", "slot": "date", "value": ""}],
                "Text": text("Sure, what date do you have in mind?",
                             "好的，请问哪一天？")})
        elif i == 1:
            events.append({
                "Agent": "User", "active_intent": f"{domain}_search",
                "Actions": [{"act": "inform", "slot": "date", "value": date}],
                "Text": text(f"On {date}, please.", "就明天吧。")})
            events.append({
                "Agent": "KnowledgeBase", "API": f"{domain}_search",
                "Constraints": {"city": city, "date": date},
                "Items": items, "TotalItems": len(items)})
            events.append({
                "Agent": "Wizard",
                "Actions": [{"act": "recommend", "slot": "name", "value": venue},
                            {"act": "inform", "slot": "price_range", "value": price}],
                "Text": text(f"I recommend {venue}. It is {price}.",
                             "我推荐这一家，价格合适。")})
        elif i == n_pairs - 2 and n_pairs >= 4 and len(domains) > 1:
            domain = domains[1]
            events.append({
                "Agent": "User", "active_intent": f"{domain}_search",
                "Actions": [{"act": "inform", "slot": "city", "value": city}],
                "Text": text(f"I also need a {domain} option there.",
                             "我还需要别的帮助。")})
            events.append({
                "Agent": "Wizard",
                "Actions": [{"act": "request", "slot": "time", "value": ""}],
                "Text": text("What time works for you?", "什么时间合适？")})
        elif i == n_pairs - 1:
            events.append({
                "Agent": "User", "active_intent": f"{domain}_search",
                "Actions": [{"act": "thank_you", "slot": "", "value": ""}],
                "Text": text("Thanks, that is everything.", "谢谢，就这些。")})
            events.append({
                "Agent": "Wizard",
                "Actions": [{"act": "goodbye", "slot": "", "value": ""}],
                "Text": text("Happy to help. Goodbye!", "不客气，再见！")})
        else:
            events.append({
                "Agent": "User", "active_intent": f"{domain}_booking",
                "Actions": [{"act": "inform", "slot": "name", "value": venue}],
                "Text": text(f"Please book {venue} for me.", "请帮我预订。")})
            events.append({
                "Agent": "KnowledgeBase", "API": f"{domain}_booking",
                "Constraints": {"name": venue, "date": date},
                "Items": [{"name": venue, "ref": f"BK{rng.randrange(10000):04d}"}],
                "TotalItems": 1})
            events.append({
                "Agent": "Wizard",
                "Actions": [{"act": "confirm", "slot": "name", "value": venue}],
                "Text": text(f"Done, {venue} is booked for {date}.",
                             "已经预订好了。")})
    return events


def make_bitod(root: str | Path, preset: str = "small", seed: int = 19) -> Path:
    cfg = PRESETS[preset]["bitod"]
    rng = random.Random(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "ontology.json").write_text(json.dumps(_bitod_ontology(), indent=1))
    for split in ("train", "valid", "test"):
        n_dialogs, n_extra = cfg[split]
        dialogs = {}
        for i in range(n_dialogs):
            n_pairs = 5 if i < n_extra else 4
            domains = (rng.sample(_BITOD_DOMAINS, 2)
                       if rng.random() < 0.2 else [rng.choice(_BITOD_DOMAINS)])
            dialogs[f"en_{split[:2]}_{i:05d}"] = {
                "Events": _bitod_events(rng, domains, n_pairs)}
        (root / f"en_{split}.json").write_text(json.dumps(dialogs))
    zh = {}
    for i in range(cfg["zh"]):
        zh[f"zh_tr_{i:05d}"] = {
            "Events": _bitod_events(rng, [rng.choice(_BITOD_DOMAINS)], 4,
                                    chinese=True)}
    (root / "zh_train.json").write_text(json.dumps(zh, ensure_ascii=False))
    return root


def write_fixture(dataset: str, root: str | Path, preset: str = "small",
                  seed: int | None = None) -> Path:
    makers = {"sgd": (make_sgd, 13), "ketod": (make_ketod, 17),
              "bitod": (make_bitod, 19)}
    if dataset not in makers:
        raise ValueError(f"unknown dataset {dataset!r}")
    maker, default_seed = makers[dataset]
    return maker(root, preset=preset, seed=seed if seed is not None else default_seed)
