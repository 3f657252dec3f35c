"""Regenerates the bundled toy knowledge graph (deterministic)."""
import random

rng = random.Random(20240917)

kinds = [("person", 100), ("city", 40), ("country", 15), ("org", 30), ("film", 50), ("award", 15)]
ids = {}
labels = []
for kind, n in kinds:
    ids[kind] = []
    for i in range(n):
        ids[kind].append(len(labels))
        labels.append(f"{kind}_{i}")

relations = ["born_in", "located_in", "works_for", "citizen_of", "won",
             "directed", "acted_in", "friend_of", "headquartered_in", "nominated_for"]
R = {name: i for i, name in enumerate(relations)}

triples = set()
def add(h, r, t):
    if h != t:
        triples.add((h, R[r], t))

for c in ids["city"]:
    add(c, "located_in", rng.choice(ids["country"]))
for o in ids["org"]:
    add(o, "located_in", rng.choice(ids["city"]))
    add(o, "headquartered_in", rng.choice(ids["country"]))
for f in ids["film"]:
    for a in rng.sample(ids["award"], rng.randint(0, 2)):
        add(f, "nominated_for", a)
for p in ids["person"]:
    add(p, "born_in", rng.choice(ids["city"]))
    for c in rng.sample(ids["country"], rng.randint(1, 2)):
        add(p, "citizen_of", c)
    add(p, "works_for", rng.choice(ids["org"]))
    for a in rng.sample(ids["award"], rng.randint(0, 2)):
        add(p, "won", a)
    for f in rng.sample(ids["film"], rng.randint(1, 3)):
        add(p, "acted_in", f)
    if rng.random() < 0.4:
        add(p, "directed", rng.choice(ids["film"]))
    for q in rng.sample(ids["person"], rng.randint(1, 3)):
        add(p, "friend_of", q)

triples = sorted(triples)
rng.shuffle(triples)
n = len(triples)
n_test = n * 8 // 100
n_valid = n * 8 // 100
test = triples[:n_test]
valid = triples[n_test:n_test + n_valid]
train = triples[n_test + n_valid:]

def write(name, rows):
    with open(name, "w") as fh:
        for h, r, t in sorted(rows):
            fh.write(f"{h}\t{r}\t{t}\n")

write("train.txt", train)
write("valid.txt", valid)
write("test.txt", test)
with open("entity_labels.tsv", "w") as fh:
    for i, label in enumerate(labels):
        fh.write(f"{i}\t{label}\n")
with open("relation_labels.tsv", "w") as fh:
    for i, label in enumerate(relations):
        fh.write(f"{i}\t{label}\n")
print(len(train), len(valid), len(test))
