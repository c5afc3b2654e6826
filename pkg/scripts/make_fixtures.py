#!/usr/bin/env python3
"""Regenerate the committed test fixtures (deterministic, no RNG).

Produces a 20-question synthetic corpus in the MuSiQue line format,
small HotpotQA/2Wiki-format files, a replay store with 8 recorded
completions per question, and a rollout-group reward file. Question ids
cycle through three base-model skill classes:

    i % 4 in {0, 1}  answerable    at least one perfect generation
    i % 4 == 2       unanswerable  every generation fully wrong
    i % 4 == 3       neither       partial credit only, never perfect
"""

import json
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

FIRST = ["Veldra", "Tormun", "Quilla", "Brenic", "Maruth", "Solive", "Kestel",
         "Ondrel", "Pravena", "Lurith", "Caldor", "Nivessa", "Tharen", "Ysolde",
         "Garnek", "Helvia", "Rostan", "Ilvane", "Dremok", "Ambrel"]
SECOND = ["Morn", "Hale", "Rin", "Vasq", "Teal", "Dov", "Pemb", "Ruz", "Corv",
          "Lint", "Mirr", "Stav", "Quor", "Bryn", "Felt", "Osk", "Jarl",
          "Wrenn", "Tove", "Alba"]
WRONG = ["Quellmarsh", "Zindrel", "Farrowick", "Ulmstead", "Vexholm",
         "Grindlow", "Yarrowisle", "Noctvale", "Ebbfort", "Skarnby",
         "Pellgrave", "Windmoor", "Oxcliff", "Juttmere", "Halloway",
         "Crowspit", "Dunvreck", "Saltmarch", "Ferngill", "Byrleott"]
TOPICS = ["observatory", "aqueduct", "foundry", "archive", "lighthouse"]

CJK_REASONING = "".join(chr(c) for c in (0x7B54, 0x6848, 0x5728, 0x6B64))


def gold_answer(i):
    return f"{FIRST[i]} {SECOND[i]}"


def gold_titles(i, j):
    return [f"Chronicle of {FIRST[i]} {h}" for h in range(1, j + 1)]


def distractor_titles(i, k):
    return [f"Survey of {WRONG[i]} {m}" for m in range(1, k + 1)]


def make_record(i):
    j = 2 + i % 3
    k = 4 + i % 5
    titles = gold_titles(i, j)
    question = (f"Who restored the {TOPICS[i % 5]} of {FIRST[i]} "
                f"according to the chronicles?")
    paragraphs = []
    for h, title in enumerate(titles, start=1):
        if h < j:
            body = (f"The {TOPICS[i % 5]} of {FIRST[i]} is described further "
                    f"in Chronicle of {FIRST[i]} {h + 1}.")
        else:
            body = (f"The restoration was completed by {gold_answer(i)} in "
                    f"the year {1400 + i}.")
        paragraphs.append({"title": title, "paragraph_text": body,
                           "is_supporting": True})
    for m, title in enumerate(distractor_titles(i, k), start=1):
        paragraphs.append({
            "title": title,
            "paragraph_text": f"{WRONG[i]} lies {m} leagues from the coast "
                              f"and trades mostly in salt.",
            "is_supporting": False,
        })
    record = {
        "id": f"mu-{i:04d}",
        "question": question,
        "answer": gold_answer(i),
        "answer_aliases": [f"Old {gold_answer(i)}"] if i % 5 == 0 else [],
        "paragraphs": paragraphs,
    }
    return record


def well_formed(reasoning, answer, citations):
    return (f"<reasoning>\n{reasoning}\n</reasoning>\n<answer>\n"
            f"Final answer: {answer}\n"
            f"Supporting passages: {', '.join(citations)}\n</answer>")


def make_generations(i):
    j = 2 + i % 3
    titles = gold_titles(i, j)
    answer = gold_answer(i)
    reasoning = (f"The chronicles name the restorer of the {TOPICS[i % 5]} "
                 f"of {FIRST[i]}.")
    gens = []
    cls = i % 4
    if cls in (0, 1):  # answerable
        for g in range(6):
            gens.append(well_formed(f"{reasoning} Pass {g}.", answer, titles))
        gens.append(well_formed(reasoning, answer,
                                titles[:-1] + [f"Survey of {WRONG[i]} 1"]))
        gens.append(well_formed(reasoning, answer, titles)
                    + "\nI hope that helps!")
    elif cls == 2:  # unanswerable
        for g in range(6):
            gens.append(well_formed(f"{reasoning} Attempt {g}.",
                                    WRONG[(i + g) % 20], titles[:1]))
        gens.append(well_formed(reasoning + " " + CJK_REASONING,
                                WRONG[i], titles[:1]))
        gens.append("<reasoning>\nNo clear answer found.\n</reasoning>\n"
                    "<answer>\nSupporting passages: "
                    + titles[0] + "\n</answer>")
    else:  # neither: partial token overlap only
        for g in range(7):
            gens.append(well_formed(f"{reasoning} Try {g}.",
                                    SECOND[i], titles))
        gens.append(well_formed(reasoning, f"{SECOND[i]} {WRONG[i]}", titles))
    return gens


def main():
    os.makedirs(OUT_DIR, exist_ok=True)

    records = [make_record(i) for i in range(20)]
    with open(os.path.join(OUT_DIR, "raw_musique.jsonl"), "w") as fp:
        for record in records:
            fp.write(json.dumps(record) + "\n")

    with open(os.path.join(OUT_DIR, "replay_store.jsonl"), "w") as fp:
        for i in range(20):
            for g, text in enumerate(make_generations(i)):
                fp.write(json.dumps({
                    "sample_id": f"mu-{i:04d}",
                    "generation_index": g,
                    "completion": text,
                }) + "\n")

    # HotpotQA-format array; the first record mirrors the published dev-file
    # shape of 10 context paragraphs with 2 supporting.
    hotpot = []
    ctx = [[f"Chronicle of Veldra {h}", [f"Sentence one of part {h}.",
                                         "It points to the next part."]]
           for h in (1, 2)]
    ctx += [[f"Survey of Quellmarsh {m}", [f"Filler sentence {m}."]]
            for m in range(1, 9)]
    hotpot.append({
        "_id": "hp-0001",
        "question": "Who restored the observatory of Veldra?",
        "answer": "Veldra Morn",
        "supporting_facts": [["Chronicle of Veldra 1", 0],
                             ["Chronicle of Veldra 2", 0]],
        "context": ctx,
    })
    hotpot.append({
        "_id": "hp-0002",
        "question": "Which foundry did Tormun Hale rebuild?",
        "answer": "Tormun Hale",
        "supporting_facts": [["Alpha Works", 0], ["Beta Works", 0]],
        "context": [["Alpha Works", ["Alpha points to Beta."]],
                    ["Beta Works", ["Beta names the rebuilder."]],
                    ["Alpha Works", ["Duplicate paragraph to be dropped."]],
                    ["Gamma Mill", ["Unrelated filler."]]],
    })
    with open(os.path.join(OUT_DIR, "raw_hotpot.json"), "w") as fp:
        json.dump(hotpot, fp, indent=1)
        fp.write("\n")

    twowiki = [{
        "_id": "tw-0001",
        "question": "Who commissioned the aqueduct of Quilla?",
        "answer": "Quilla Rin",
        "supporting_facts": [["Quilla Annals", 0], ["Rin Registry", 1]],
        "context": [["Quilla Annals", ["The aqueduct is listed in the Rin Registry."]],
                    ["Rin Registry", ["Older entry.", "Quilla Rin commissioned it."]],
                    ["Harbor Gazette", ["Tide tables and nothing else."]]],
        "evidences": [["Quilla Annals", "listed in", "Rin Registry"]],
    }]
    with open(os.path.join(OUT_DIR, "raw_twowiki.json"), "w") as fp:
        json.dump(twowiki, fp, indent=1)
        fp.write("\n")

    # Rollout groups: 3 of 10 uniform, matching a 0.3 zero-signal fraction.
    groups = []
    for g in range(10):
        if g in (0, 4, 8):
            rewards = [6.0] * 7
        else:
            rewards = [((g * 7 + r) % 11) - 1.0 + 0.5 * r for r in range(7)]
        groups.append({"prompt_id": f"grp-{g:02d}", "rewards": rewards})
    with open(os.path.join(OUT_DIR, "reward_groups.jsonl"), "w") as fp:
        for group in groups:
            fp.write(json.dumps(group) + "\n")

    print(f"fixtures written to {os.path.abspath(OUT_DIR)}")


if __name__ == "__main__":
    main()
