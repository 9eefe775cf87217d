"""Builds the 20-user synthetic typhoon scenario used by the CLI tests.

    python3 make_synthetic.py

Writes pre-event histories, event-day ground truth, a tagged response
script for the scripted provider, the run config and the event files.
"""
import json
import random

TAXONOMY = [
    ("Residence", "Home (private)"),
    ("Professional and Other Places", "Office"),
    ("Dining and Drinking", "Ramen Restaurant"),
    ("Dining and Drinking", "Cafe"),
    ("Retail", "Convenience Store"),
    ("Retail", "Supermarket"),
    ("Travel and Transportation", "Train Station"),
    ("Landmarks and Outdoors", "Park"),
    ("Retail", "Home Appliance Store"),
]

USERS = [f"u{i:02d}" for i in range(1, 21)]
HISTORY_DATES = [f"2019-{m:02d}-{d:02d}" for m, d in [(9, 28), (9, 30), (10, 2), (10, 5), (10, 7), (10, 9), (10, 11)]]
EVENT_DATES = ["2019-10-12", "2019-10-13"]

PATTERN = {
    "core_behavior": "Weekday commute between home and an office, with a convenience-store stop",
    "points_of_inertia": ["Returning home every evening"],
    "points_of_fracture": ["Depends on a single rail line"],
}
EVENT = {
    "primary_intent": "High risk outdoors, strong incentive to stay home",
    "behavioral_implications": ["Stock up on supplies before the storm", "Avoid rail travel"],
    "risk_reward_calculus": "Injury risk outweighs the value of non-essential outings",
}
ACTION = {
    "primary_intent": "Short supply run close to home",
    "habit_adherence": {"level": "medium", "rationale": "keeps the evening return home"},
    "event_compliance": {"level": "high", "rationale": "stays near home and avoids trains"},
}
PASS = {"internal_ok": True, "external_ok": True, "internal_rationale": "matches routine", "external_rationale": "avoids exposure"}
FAIL_EXT = {"internal_ok": True, "external_ok": False, "internal_rationale": "matches routine",
            "external_rationale": "travels by train during the suspension"}
FAIL_BOTH = {"internal_ok": False, "external_ok": False, "internal_rationale": "drops the evening return home",
             "external_rationale": "stays outdoors during peak winds"}


def record(user, day, hh, mm, home, poi, rng):
    cat, sub = TAXONOMY[poi % len(TAXONOMY)]
    lat = home[0] + (poi % 5) * 0.013 + rng.uniform(-0.002, 0.002)
    lon = home[1] + (poi % 3) * 0.017 + rng.uniform(-0.002, 0.002)
    return {
        "user_id": user,
        "lat": round(lat, 5),
        "lon": round(lon, 5),
        "poi_id": f"{user}-p{poi}",
        "subcategory": sub,
        "category": cat,
        "timestamp": f"{day}T{hh:02d}:{mm:02d}:00+09:00",
    }


def day_records(user, day, home, rng, lo, hi):
    n = rng.randint(lo, hi)
    minutes = sorted(rng.sample(range(7 * 60, 23 * 60), n))
    return [record(user, day, m // 60, m % 60, home, rng.randrange(len(TAXONOMY)), rng) for m in minutes]


def plan(recs, rng):
    steps = []
    for r in recs:
        hh, mm = int(r["timestamp"][11:13]), int(r["timestamp"][14:16])
        mm = min(59, mm + rng.randint(0, 15))
        steps.append({"time": f"{hh:02d}:{mm:02d}", "lat": round(r["lat"] + rng.uniform(-0.01, 0.01), 5),
                      "lon": round(r["lon"] + rng.uniform(-0.01, 0.01), 5),
                      "category": r["category"], "subcategory": r["subcategory"]})
    return {"steps": steps, "justification": "keeps close to home while the typhoon passes"}


def main():
    rng = random.Random(7)
    history, truth = [], []
    script = {k: [] for k in ["pattern_gist", "event_gist", "generate", "regenerate", "action_gist", "audit"]}
    script["event_gist"].append(json.dumps(EVENT))
    for idx, user in enumerate(USERS):
        home = (35.55 + rng.uniform(0, 0.3), 139.5 + rng.uniform(0, 0.4))
        for day in HISTORY_DATES:
            history += day_records(user, day, home, rng, 2, 6)
        script["pattern_gist"].append(json.dumps(PATTERN))
        for j, day in enumerate(EVENT_DATES):
            # every fourth user stays in on the first typhoon day
            recs = [] if (idx % 4 == 0 and j == 0) else day_records(user, day, home, rng, 1, 4)
            truth += recs
            outcome = (idx + j) % 5  # 0,1,2: pass first time; 3: fail once; 4: fail always
            script["generate"].append(json.dumps(plan(recs, rng)))
            verdicts = {0: [PASS], 1: [PASS], 2: [PASS], 3: [FAIL_EXT, PASS], 4: [FAIL_BOTH] * 3}[outcome]
            for _ in verdicts[1:]:
                script["regenerate"].append(json.dumps(plan(recs[:-1] if recs else recs, rng)))
            for v in verdicts:
                script["action_gist"].append(json.dumps(ACTION))
                script["audit"].append(json.dumps(v))

    with open("synthetic_history.jsonl", "w") as f:
        f.writelines(json.dumps(r) + "\n" for r in history)
    with open("synthetic_truth.jsonl", "w") as f:
        f.writelines(json.dumps(r) + "\n" for r in truth)
    with open("synthetic_script.json", "w") as f:
        json.dump(script, f, indent=1)
    with open("synthetic_config.json", "w") as f:
        json.dump({
            "seed": 42,
            "loop": {"max_iterations": 3},
            "data": {"timezone": "+09:00", "short_window_days": 7, "grid_size": 10},
            "event": {
                "name": "typhoon",
                "pre_event_start": "2019-09-28T00:00:00",
                "pre_event_end": "2019-10-11T23:59:00",
                "event_start": "2019-10-12T00:00:00",
                "event_end": "2019-10-13T23:59:00",
            },
        }, f, indent=2)


if __name__ == "__main__":
    main()
