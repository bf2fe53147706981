#!/usr/bin/env python3
"""Regenerates data/fixture/mock/rules.json from the fixture corpus.

Offsets are computed from the corpus so the replies stay consistent with it.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "data" / "fixture" / "corpus.txt"
OUT = ROOT / "data" / "fixture" / "mock" / "rules.json"

CUES = ["丞相史曰：", "文學對曰：", "大夫曰：", "御史曰：", "丞相曰：", "文學曰：", "賢良曰："]


def chapters():
    out, cur = [], None
    for line in CORPUS.read_text(encoding="utf-8").splitlines():
        if line.startswith("## "):
            cur = []
            out.append(cur)
        elif cur is not None and line.strip():
            cur.append(line.strip())
    return out


def utterances(lines):
    # Mirrors the segmenter for this fixture: one turn per line, narration first.
    return {f"u{i:03d}": line for i, line in enumerate(lines, start=1)}


ENTITIES = {
    1: [("匈奴", "place", "u003"), ("中國", "place", "u003"), ("孔子", "person", "u004"),
        ("匈奴", "place", "u005"), ("朔方", "place", "u005")],
    2: [("禹", "person", "u001"), ("湯", "person", "u001"), ("歷山", "place", "u001"), ("莊山", "place", "u001"),
        ("齊", "place", "u001"), ("趙", "place", "u001"), ("禹", "person", "u002"), ("湯", "person", "u002"),
        ("管仲", "person", "u003"), ("齊", "place", "u003"), ("舜", "person", "u003"), ("伊尹", "person", "u003"),
        ("桀", "person", "u004"), ("伊尹", "person", "u004")],
    3: [("秦始皇", "person", "u001"), ("商鞅", "person", "u001"), ("崑山", "place", "u001"),
        ("碣石", "place", "u001"), ("匈奴", "place", "u001"), ("百越", "place", "u001"),
        ("周公", "person", "u002"), ("孔子", "person", "u002"), ("崑山", "place", "u002"),
        ("中山", "place", "u003"), ("趙", "place", "u003"), ("燕", "place", "u003"), ("齊", "place", "u003"),
        ("蓬萊", "place", "u003"), ("堯", "person", "u004"), ("舜", "person", "u004")],
}

RELATIONS = {
    1: [],
    2: [("禹", "湯", "compared-with", "u001"), ("管仲", "齊", "served-in", "u003"),
        ("舜", "伊尹", "compared-with", "u003"), ("禹", "湯", "compared-with", "u002")],
    3: [("秦始皇", "商鞅", "adopted-policies-of", "u001"), ("秦始皇", "崑山", "expanded-to", "u001"),
        ("秦始皇", "匈奴", "repelled", "u001"), ("周公", "孔子", "compared-with", "u002"),
        ("堯", "舜", "compared-with", "u004"), ("韓非", "商鞅", "compared-with", "u001")],
}

# (distinctive substring, label, confidence, [(span, gloss)], explanation)
CLASSIFY = [
    ("竊聞治人之道", "confucian", "high", [("道德", "morality"), ("仁義", "benevolence and righteousness"),
                                        ("教化", "education and moral transformation")],
     "Appeals to morality, benevolence and education over profit."),
    ("匈奴背叛不臣", "legalist", "high", [("鹽、鐵", "salt and iron monopolies"), ("府庫", "state treasury")],
     "Defends state monopolies as revenue for frontier defence."),
    ("不患寡而患不均", "confucian", "high", [("仁義", "benevolence and righteousness"), ("仁政", "benevolent government")],
     "Rule by benevolence makes armies unnecessary."),
    ("匈奴桀黠", "legalist", "medium", [("誅討", "punitive campaigns"), ("均輸", "equable transport system")],
     "Argues for force and the revenue policies that fund it."),
    ("王者塞天財", "legalist", "high", [("以輕重御民", "control the people through price management"),
                                     ("均輸", "equable transport system")],
     "State control of markets and reserves."),
    ("十一而稅", "confucian", "high", [("務本", "attend to the root, agriculture"), ("稼穡", "farming")],
     "Light taxation and agriculture as the basis of the people."),
    ("賢聖治家非一寶", "legalist", "medium", [("管仲以權譎霸齊", "Guan Zhong made Qi hegemon through expedient tactics"),
                                         ("役諸侯", "command the feudal lords")],
     "Praises statecraft and control of wealth rather than farming alone."),
    ("商通物而不豫", "confucian", "medium", [("君子", "the gentleman"), ("長詐", "breeds deceit")],
     "Distrusts merchants and holds up the gentleman's ethics."),
    ("秦始皇用商鞅之法", "legalist", "high", [("商鞅之法", "the laws of Shang Yang"), ("法令刑罰", "laws and punishments")],
     "Credits law and punishment for Qin's power."),
    ("周公修禮以治天下", "confucian", "high", [("修禮", "cultivating ritual"), ("仁義", "benevolence and righteousness"),
                                           ("德化", "transformation by virtue"), ("忠信", "loyalty and trust")],
     "Ritual, benevolence and virtue instead of punishment."),
    ("中山之地", "legalist", "medium", [("設法以禁之", "set up laws to forbid it"), ("嚴刑", "severe punishment")],
     "Calls for laws and harsh punishments to enforce the basic occupation."),
    ("二世而亡", "confucian", "high", [("仁義", "benevolence and righteousness"), ("務德而不務刑", "virtue not punishment"),
                                   ("禮義", "ritual and righteousness")],
     "Benevolence brought peace while Qin's punishments brought ruin."),
]


def offset_of(text, surface):
    return text.find(surface)


def main():
    rules = []
    chs = chapters()
    titles = {1: "本議", 2: "力耕", 3: "論功"}
    for idx, lines in enumerate(chs, start=1):
        utts = utterances(lines)
        ents = []
        for name, kind, u in ENTITIES[idx]:
            text = utts[u]
            item = {"name": name, "kind": kind, "utterance_id": f"c{idx:03d}-{u}"}
            off = offset_of(text, name)
            if off >= 0:
                item["offset"] = off
            ents.append(item)
        rules.append({
            "match": [f"Identify every person and place named in chapter {idx} ({titles[idx]})"],
            "scope": "task",
            "preamble": "Here are the entities I found.",
            "response_json": {"entities": ents},
        })
        rels = [{"source": s, "target": t, "label": l, "evidence": f"c{idx:03d}-{u}"} for s, t, l, u in RELATIONS[idx]]
        rules.append({
            "match": [f"between the known entities of chapter {idx} ({titles[idx]})"],
            "scope": "task",
            "response_json": {"relations": rels},
        })
    for needle, label, conf, feats, expl in CLASSIFY:
        rules.append({
            "match": ["Statement:\n", needle],
            "scope": "task",
            "response_json": {
                "reasoning": "The speaker's key terms point to " + label + " values.",
                "label": label,
                "confidence": conf,
                "explanation": expl,
                "features": [{"span": s, "gloss": g} for s, g in feats],
            },
        })
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"rules": rules}, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
