"""Smoke test for the s2st extension module.

    maturin develop -m crates/python/Cargo.toml   # or: pip install <built wheel>
    python crates/python/python/smoke_test.py
"""

import json
import os
import tempfile

import s2st

assert s2st.levenshtein("kitten", "sitting") == 3
assert s2st.normalized_edit_distance("", "") == 0.0
assert s2st.tokenize_13a("Hello, world!") == "Hello , world !"

score = s2st.corpus_bleu(["the cat sat on the mat"], ["the cat sat on the mat"])
assert score.score == 100.0 and score.brevity_penalty == 1.0

assert abs(s2st.average_lagging([1.0, 2.0, 3.0, 4.0], 4.0, 4) - 1.0) < 1e-12

cap = s2st.Policy("cap:0.5")
assert cap.label == "CAP (γ=0.5)"
assert cap.decide(s2st.Hypothesis("hola", no_speech_prob=0.1))[0]
assert not cap.decide(s2st.Hypothesis("hola", no_speech_prob=0.9))[0]
assert s2st.Policy("offline").decide(s2st.Hypothesis("hola"), end_of_stream=True)[0]

entries = [
    {"query_index": 0, "expected_buffer_seconds": 1.0, "expected_prior_text": "", "text": "hello",
     "avg_logprob": -0.2, "no_speech_prob": 0.1, "compute_seconds": 0.2},
    {"query_index": 1, "expected_buffer_seconds": 1.0, "expected_prior_text": "hello", "text": "world",
     "avg_logprob": -0.2, "no_speech_prob": 0.1, "compute_seconds": 0.2},
]
with tempfile.TemporaryDirectory() as tmp:
    trace = os.path.join(tmp, "utt.trace.jsonl")
    with open(trace, "w") as f:
        f.write("# hand-written trace\n")
        f.writelines(json.dumps(e) + "\n" for e in entries)

    result = s2st.replay_trace(2.0, trace, 1.0, s2st.Policy("greedy"))
    assert result.transcript == "hello world", result.transcript
    assert [e[0] for e in result.emissions] == [1.2, 2.2]
    bleu, al, al_ca = result.metrics("hello world")
    assert bleu == 0.0 and al_ca >= al  # two tokens cannot form a 4-gram

    try:
        s2st.replay_trace(2.0, trace, 2.0, s2st.Policy("greedy"))
    except s2st.TraceDivergenceError:
        pass
    else:
        raise AssertionError("2 s replay of a 1 s trace must diverge")

rows = [s2st.ReportRow("Offline", 1.0, 42.9, 9.0, 9.6, 75, 0), s2st.ReportRow("Offline", 2.0)]
report = s2st.emit_report(rows, "markdown")
assert "| Offline | 42.9 (9.6) | — |" in report, report

print("s2st smoke test passed")
