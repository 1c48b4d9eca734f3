"""Regenerates the synthetic end-to-end corpus, topics, concepts and qrels.

Golden outputs are produced separately by `cargo run -p kbqe-cli` (see the
README); rerunning this script with the same seed reproduces the inputs.
"""
import json
import random
from pathlib import Path

OUT = Path(__file__).parent
rng = random.Random(20131121)

FILLER = ["the", "is", "so", "and", "a", "lol", "omg", "today", "just", "really",
          "this", "my", "what", "for", "with", "on", "to", "we", "can't", "wait"]

TOPICS = [
    {
        "id": "MB071", "query": "Australian Open Djokovic vs. Murray", "query_time": 20.5,
        "query_words": ["australian", "open", "Djokovic", "Murray"],
        "knowledge": ["tennis", "final", "melbourne", "grand", "slam", "serbian", "scottish",
                      "champion", "match", "set", "title"],
        "distract": [["open", "house", "sale", "weekend", "realtor"],
                     ["Murray", "river", "fishing", "boat", "trip"]],
    },
    {
        "id": "MB111", "query": "water shortage", "query_time": 30.25,
        "query_words": ["water", "shortage"],
        "knowledge": ["drought", "africa", "crisis", "rainfall", "reservoir", "global",
                      "area", "supply", "farmers", "affect"],
        "distract": [["water", "bottle", "gym", "workout", "sweat"],
                     ["shortage", "nurses", "hospital", "staff", "shift"]],
    },
    {
        "id": "MB115", "query": "memories of Mr. Rogers", "query_time": 25.75,
        "query_words": ["memories", "Mr.", "Rogers"],
        "knowledge": ["fred", "neighborhood", "television", "children", "host", "pbs",
                      "cardigan", "birthday", "kindness", "puppet"],
        "distract": [["memories", "summer", "camp", "lake", "friends"],
                     ["Rogers", "cup", "baseball", "stadium", "tickets"]],
    },
    {
        "id": "MB141", "query": "Mila Kunis in Oz movie", "query_time": 35.5,
        "query_words": ["Mila", "Kunis", "Oz", "movie"],
        "knowledge": ["great", "powerful", "witch", "wizard", "actress", "disney",
                      "franco", "emerald", "premiere", "trailer"],
        "distract": [["movie", "night", "popcorn", "couch", "friday"],
                     ["Oz", "weather", "sydney", "beach", "surf"]],
    },
    {
        "id": "MB150", "query": "UK wine industry", "query_time": 38.0,
        "query_words": ["UK", "wine", "industry"],
        "knowledge": ["grape", "vineyard", "harvest", "export", "economy", "report",
                      "british", "sparkling", "canadian", "growers"],
        "distract": [["industry", "conference", "tech", "startup", "keynote"],
                     ["wine", "glass", "dinner", "date", "cheese"]],
    },
]

NOISE = ["coffee", "monday", "traffic", "music", "concert", "pizza", "cat", "dog",
         "sleep", "homework", "exam", "phone", "battery", "game", "score", "rain",
         "sunny", "weekend", "party", "birthday", "shopping", "mall", "bus", "train"]


def sentence(core, n_fill):
    words = list(core) + rng.sample(FILLER, n_fill)
    rng.shuffle(words)
    return " ".join(words)


def make_corpus():
    tweets, qrels = [], []
    serial = iter(range(1, 10_000))

    def emit(text, t, titles=()):
        tid = f"tw{next(serial):04d}"
        tweets.append({"id": tid, "text": text, "post_time": round(t, 4),
                       "url_titles": list(titles)})
        return tid

    for topic in TOPICS:
        tq = topic["query_time"]
        qw, kw = topic["query_words"], topic["knowledge"]
        # on topic: query words plus knowledge words
        for i in range(12):
            core = rng.sample(qw, k=max(1, len(qw) - rng.randint(0, 2))) + rng.sample(kw, 3)
            after = i >= 10
            t = tq + rng.uniform(0.1, 3.0) if after else tq - rng.expovariate(1 / 4.0) - 0.01
            titles = [" ".join(rng.sample(kw, 2)).title()] if i % 4 == 0 else []
            tid = emit(sentence(core, rng.randint(2, 5)), max(t, 0.0), titles)
            qrels.append((topic["id"], tid, 2 if i % 3 else 1))
        # background knowledge without most query words
        for _ in range(8):
            core = rng.sample(qw, 1) + rng.sample(kw, 4)
            t = tq - rng.uniform(0.5, 15.0)
            tid = emit(sentence(core, rng.randint(1, 4)), max(t, 0.0))
            qrels.append((topic["id"], tid, 1))
        # sharing a query word, off topic
        for d in topic["distract"]:
            for _ in range(5):
                core = [d[0]] + rng.sample(d[1:], 3)
                t = rng.uniform(0.0, tq + 2.0)
                tid = emit(sentence(core, rng.randint(2, 5)), t)
                qrels.append((topic["id"], tid, 0))

    while len(tweets) < 200:
        core = rng.sample(NOISE, 4)
        emit(sentence(core, rng.randint(2, 6)), rng.uniform(0.0, 40.0))

    # ids carry no ordering hint
    order = list(range(len(tweets)))
    rng.shuffle(order)
    return [tweets[i] for i in order], qrels


CONCEPTS = [
    {"concept_id": "m.0mila", "name": "Mila Kunis", "aliases": ["Milena Markovna Kunis"],
     "notable_for": ["Actor"], "notable_types": ["Celebrity"],
     "description": "Milena Markovna Kunis is an American actress and voice artist. In 1991 she "
                    "moved from the Soviet Union to Los Angeles with her family. She starred as "
                    "the witch Theodora in the Disney film Oz the Great and Powerful with James Franco.",
     "domain_properties": {"film": "Oz the Great and Powerful; Black Swan; Ted"}},
    {"concept_id": "m.0oz", "name": "The Wizard of Oz", "aliases": ["Oz", "Wizard of Oz"],
     "notable_for": ["Film"], "notable_types": ["Film"],
     "description": "A fantasy film in which Dorothy travels to the land of Oz, meets a wizard "
                    "in the Emerald City and defeats the wicked witch. Disney released a prequel "
                    "about the great and powerful wizard.",
     "domain_properties": {}},
    {"concept_id": "m.0ausopen", "name": "Australian Open", "aliases": [],
     "notable_for": ["Tennis tournament"], "notable_types": ["Sports event"],
     "description": "The Australian Open is a grand slam tennis tournament held each January in "
                    "Melbourne. The men's final is played on the last Sunday.",
     "domain_properties": {"sports": "hard court grand slam champion title"}},
    {"concept_id": "m.0djokovic", "name": "Novak Djokovic", "aliases": ["Djokovic"],
     "notable_for": ["Tennis player"], "notable_types": ["Athlete"],
     "description": "Serbian professional tennis player and grand slam champion who won the "
                    "Australian Open title several times.",
     "domain_properties": {}},
    {"concept_id": "m.0murray", "name": "Andy Murray", "aliases": ["Murray"],
     "notable_for": ["Tennis player"], "notable_types": ["Athlete"],
     "description": "Scottish tennis player who reached the final of the Australian Open and won "
                    "the Olympic title.",
     "domain_properties": {}},
    {"concept_id": "m.0rogers", "name": "Fred Rogers", "aliases": ["Mr. Rogers", "Mister Rogers"],
     "notable_for": ["TV host"], "notable_types": ["Television personality"],
     "description": "Fred Rogers was an American television host who created the PBS children "
                    "series Mister Rogers' Neighborhood, known for his cardigan, puppet friends "
                    "and kindness.",
     "domain_properties": {"tv": "children television neighborhood puppet"}},
    {"concept_id": "m.0water", "name": "Water scarcity", "aliases": ["water shortage"],
     "notable_for": [], "notable_types": ["Environmental issue"],
     "description": "Water scarcity is the lack of fresh water supply to meet demand. It can affect "
                    "every area of the globe, and drought in Africa leaves farmers in crisis when "
                    "rainfall fails and reservoir levels drop.",
     "domain_properties": {}},
    {"concept_id": "m.0uk", "name": "United Kingdom", "aliases": ["UK", "Britain"],
     "notable_for": ["Country"], "notable_types": ["Country"],
     "description": "The United Kingdom is a British island country in northwestern Europe with "
                    "London as its capital and a large service economy.",
     "domain_properties": {}},
    {"concept_id": "m.0wine", "name": "Wine", "aliases": [],
     "notable_for": ["Beverage"], "notable_types": ["Food"],
     "description": "Wine is an alcoholic drink made from fermented grape juice. Vineyard growers "
                    "harvest the grape each autumn, and sparkling wine is a growing export.",
     "domain_properties": {"business": "wine industry report economy export"}},
    {"concept_id": "m.0sydney", "name": "Sydney", "aliases": [],
     "notable_for": ["City"], "notable_types": ["City"],
     "description": "Sydney is the largest city in Australia, known for its beach culture and "
                    "harbour.",
     "domain_properties": {}},
    {"concept_id": "m.0blackswan", "name": "Black Swan", "aliases": [],
     "notable_for": ["Film"], "notable_types": ["Film"],
     "description": "Psychological thriller film about a ballet dancer.",
     "domain_properties": {}},
]


def main():
    tweets, qrels = make_corpus()
    with open(OUT / "corpus.jsonl", "w") as f:
        for t in tweets:
            f.write(json.dumps(t) + "\n")
    with open(OUT / "topics.jsonl", "w") as f:
        for t in TOPICS:
            f.write(json.dumps({k: t[k] for k in ("id", "query", "query_time")}) + "\n")
    with open(OUT / "concepts.jsonl", "w") as f:
        for c in CONCEPTS:
            f.write(json.dumps(c) + "\n")
    with open(OUT / "qrels.txt", "w") as f:
        for topic, doc, grade in sorted(qrels):
            f.write(f"{topic} 0 {doc} {grade}\n")


if __name__ == "__main__":
    main()
