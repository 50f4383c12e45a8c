"""Smoke test for the pytextlstm extension module.

Build and run:
    maturin develop -m crates/python/Cargo.toml
    python python/smoke_test.py
"""

import math
import os
import tempfile

import pytextlstm as tl

LAB = """# key: G
0 4 G:maj
4 8 C:maj
8 12 D:7
12 16 G:maj
"""


def main():
    p = tl.reweight([0.8, 0.2], 0.5)
    assert abs(p[0] - 0.941176) < 1e-6 and abs(p[1] - 0.058824) < 1e-6, p

    err = tl.grad_check(seed=1)
    assert err <= 1e-4, err

    text = tl.encode_lab(LAB)
    assert text.startswith("_START_ C:maj C:maj C:maj C:maj F:maj"), text
    corpus = "\n".join([text] * 30)
    assert "scores: 30" in tl.corpus_report(corpus)

    model = tl.Model.train(corpus, hidden=16, seq_len=16, batch=4, epochs=20, seed=3, lr=0.01)
    assert model.domain == "chord" and model.mode == "word", model
    assert len(model.losses) == 20 and model.losses[-1] < model.losses[0], model.losses
    probs = model.next_distribution(["_START_"])
    assert len(probs) == len(model.vocab) and math.isclose(sum(probs), 1.0, rel_tol=1e-5)

    tokens = model.generate(["_START_"], 32, alpha=0.5, regions=[(8, 16, 1.5)], seed=9)
    assert len(tokens) == 32
    assert "|" in tl.decode_progression(tokens)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "chords.ckpt")
        model.save(path)
        again = tl.Model.load(path)
    assert again.to_bytes() == model.to_bytes()
    assert again.generate(["_START_"], 32, alpha=0.5, regions=[(8, 16, 1.5)], seed=9) == tokens

    try:
        model.generate(["Q:maj"], 4)
    except ValueError as e:
        assert "Q:maj" in str(e)
    else:
        raise AssertionError("out-of-vocabulary seed accepted")

    bar = ["_BAR_"] + ["100100000", "000100000", "010100000", "000100000"] * 4
    midi = tl.render_midi(bar, tempo=100.0)
    assert midi[:4] == b"MThd"
    assert tl.encode_midi(midi).split() == bar
    assert tl.fill_fraction(bar) == 0.0

    print("pytextlstm smoke test passed:", model)


if __name__ == "__main__":
    main()
