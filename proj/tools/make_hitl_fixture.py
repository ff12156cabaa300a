#!/usr/bin/env python3
"""Derive the scripted analyst fixture from an FT RuleOracle transcript.

The scripted analyst confirms most of what the oracle confirms but skips every
fourth confirmed packet (misses) and, every third quiet turn, flags the first
packet of the batch (false positives). The result replays with the scripted
backend: mcguard session --backend scripted --script <file>.
"""
import json
import sys


def main(transcript_path, labels_path, out_path):
    anomalous = set()
    with open(labels_path) as f:
        next(f)
        for line in f:
            seq, label, _ = line.rstrip("\n").split(",", 2)
            if label == "Anomalous":
                anomalous.add(int(seq))

    first_seq = {}
    turns = []
    with open(transcript_path) as f:
        for line in f:
            rec = json.loads(line)
            if rec["record"] == "C":
                first_seq[rec["turn"]] = rec["first_seq"]
            elif rec["record"] == "A":
                turns.append((rec["turn"], rec["actions"]))

    kept = 0
    quiet = 0
    out = [{"schema_version": 1, "record": "script", "analyst": "scripted", "derived_from": "goose_mixed FT"}]
    for turn, actions in turns:
        script = []
        for a in actions:
            if a["kind"] == "ConfirmAnomaly":
                seqs = []
                for s in a["seq_indices"]:
                    kept += 1
                    if kept % 4 != 0:
                        seqs.append(s)
                if seqs:
                    script.append({"kind": "ConfirmAnomaly", "seq_indices": seqs})
            elif a["kind"] == "RequestMorePackets":
                quiet += 1
                s = first_seq[turn]
                if quiet % 3 == 0 and s not in anomalous:
                    script.append({"kind": "ConfirmAnomaly", "seq_indices": [s]})
                script.append(a)
            else:
                script.append(a)
        out.append({"schema_version": 1, "record": "A", "turn": turn, "actions": script})

    with open(out_path, "w") as f:
        for rec in out:
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:4])
