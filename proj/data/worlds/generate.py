"""Regenerates the bundled world files. Distances are Manhattan distances
between grid coordinates, which keeps every table a metric."""
import json
import pathlib

HERE = pathlib.Path(__file__).parent


def world(name, seed, rooms, places, objects, people, start, outcome=None):
    ids = sorted(places)
    dist = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            (xa, ya), (xb, yb) = places[a][2], places[b][2]
            dist.append([a, b, float(abs(xa - xb) + abs(ya - yb))])
    doc = {
        "name": name,
        "seed": seed,
        "robot_start": start,
        "rooms": rooms,
        "locations": [{"id": k, "class": places[k][0], "room": places[k][1]} for k in ids],
        "distances": dist,
        "objects": objects,
        "people": people,
        "robot_speed": 0.5,
        "tick_seconds": 0.01,
    }
    if outcome:
        doc["outcome_model"] = outcome
    return doc


apartment_places = {
    "entrance": ("waypoint", "living-room", (0, 0)),
    "coffee-table": ("table", "living-room", (0, 2)),
    "bookshelf": ("bookshelf", "living-room", (-1, 3)),
    "tv-stand": ("tv-stand", "living-room", (1, 3)),
    "counter": ("counter", "kitchen", (4, 0)),
    "kitchen-table": ("table", "kitchen", (4, 1)),
    "cupboard": ("cupboard", "kitchen", (5, 1)),
    "nightstand": ("nightstand", "bedroom", (0, 6)),
    "dresser": ("dresser", "bedroom", (-2, 6)),
    "bathroom-door": ("waypoint", "bathroom", (-3, 0)),
}
apartment_rooms = ["kitchen", "living-room", "bedroom", "bathroom"]
apartment_people = [
    {"name": "operator", "waypoints": ["entrance"]},
    {"name": "jan", "waypoints": ["nightstand"]},
]
apartment_objects = [
    {"id": "apple-1", "class": "apple", "true_location": "cupboard", "known": False},
    {"id": "juice-1", "class": "juice", "true_location": "coffee-table", "known": True},
    {"id": "orange-1", "class": "orange", "true_location": "cupboard", "known": True},
    {"id": "pear-1", "class": "pear", "true_location": "kitchen-table", "known": True},
    {"id": "cereal-1", "class": "cereal", "true_location": "bookshelf", "known": True},
]

building_places = {
    "lobby-desk": ("desk", "lobby", (0, 0)),
    "elevator": ("waypoint", "lobby", (0, 2)),
    "lab-bench": ("bench", "lab", (6, 0)),
    "lab-shelf": ("shelf", "lab", (6, 2)),
    "bar": ("bar", "cafe", (0, 6)),
    "cafe-table-1": ("table", "cafe", (2, 6)),
    "cafe-table-2": ("table", "cafe", (3, 7)),
    "car": ("waypoint", "loading-dock", (-4, 0)),
}


def main():
    docs = {
        "demo_apartment.json": world("demo-apartment", 7, apartment_rooms, apartment_places, apartment_objects,
                                     apartment_people, "entrance"),
        "demo_apartment_noapple.json": world("demo-apartment-noapple", 7, apartment_rooms, apartment_places,
                                             [o for o in apartment_objects if o["id"] != "apple-1"],
                                             apartment_people, "entrance"),
        "demo_building.json": world(
            "demo-building", 11, ["lobby", "lab", "cafe", "loading-dock"], building_places,
            [{"id": "bag-1", "class": "bag", "true_location": "car", "known": True},
             {"id": "coffee-1", "class": "coffee", "true_location": "bar", "known": True}],
            [{"name": "operator", "waypoints": ["elevator", "lobby-desk", "car"]},
             {"name": "sam", "waypoints": ["lobby-desk"]},
             {"name": "alex", "waypoints": ["cafe-table-2"]}],
            "lobby-desk"),
    }
    for name, doc in docs.items():
        (HERE / name).write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
