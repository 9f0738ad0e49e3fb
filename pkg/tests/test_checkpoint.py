"""Checkpoint container: manifest layout, bit-exact reload, resume replay."""

import json

import numpy as np
import pytest
from tinydata import MODEL, tcfg, tiny_dataset

from featgan import trainer as tr
from featgan.checkpoint import FORMAT, VERSION, load_checkpoint, save_checkpoint
from featgan.params import ParamSet
from featgan.trainer import Trainer


def _sets(seed=0):
    rng = np.random.default_rng(seed)
    a = ParamSet({"fc/w": rng.standard_normal((3, 4)).astype(np.float32),
                  "fc/b": np.zeros(4, dtype=np.float32)})
    b = ParamSet({"blk0/c1/w": rng.standard_normal((2, 3, 3, 3)).astype(np.float32)})
    return {"alpha": a, "beta": b}


def test_round_trip_bit_exact(tmp_path):
    path = tmp_path / "t.ckpt"
    sets = _sets()
    save_checkpoint(path, sets, counters={"round": 7, "global_iter": 19})
    loaded, counters = load_checkpoint(path)
    assert counters == {"round": 7, "global_iter": 19}
    assert sorted(loaded) == sorted(sets)
    for set_name, pset in sets.items():
        got = loaded[set_name]
        assert got.names() == pset.names()
        for name in pset.names():
            assert got[name].dtype == np.float32
            assert np.array_equal(got[name], pset[name])
            assert got[name].tobytes() == pset[name].astype("<f4").tobytes()


def test_manifest_is_one_json_line_with_offsets(tmp_path):
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, _sets())
    raw = path.read_bytes()
    header, _, body = raw.partition(b"\n")
    manifest = json.loads(header.decode("ascii"))
    assert manifest["format"] == FORMAT == "PGAN"
    assert manifest["version"] == VERSION == 1
    offset = 0
    for entry in manifest["arrays"]:
        assert set(entry) == {"name", "shape", "dtype", "byte_offset"}
        assert entry["dtype"] == "f32"
        assert entry["byte_offset"] == offset
        offset += 4 * int(np.prod(entry["shape"]))
    assert len(body) == offset  # buffers are dense, nothing trailing


def _tamper(tmp_path, mutate):
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, _sets())
    raw = path.read_bytes()
    header, _, body = raw.partition(b"\n")
    manifest = json.loads(header.decode("ascii"))
    mutate(manifest)
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(json.dumps(manifest).encode("ascii") + b"\n" + body)
    return bad


def test_rejects_wrong_format(tmp_path):
    bad = _tamper(tmp_path, lambda m: m.update(format="NPZ"))
    with pytest.raises(ValueError, match="not a PGAN checkpoint"):
        load_checkpoint(bad)


def test_rejects_wrong_version(tmp_path):
    bad = _tamper(tmp_path, lambda m: m.update(version=2))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(bad)


def test_rejects_unknown_dtype(tmp_path):
    def mutate(m):
        m["arrays"][0]["dtype"] = "f64"
    bad = _tamper(tmp_path, mutate)
    with pytest.raises(ValueError, match="dtype"):
        load_checkpoint(bad)


def test_rejects_truncated_file(tmp_path):
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, _sets())
    raw = path.read_bytes()
    (tmp_path / "cut.ckpt").write_bytes(raw[:-5])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(tmp_path / "cut.ckpt")


# -- full model state ---------------------------------------------------------


def test_state_round_trip(tmp_path):
    state = tr.init_state(MODEL, 3)
    state.counters["round"] = 5
    path = tmp_path / "state.ckpt"
    tr.save_state(path, state)
    loaded = tr.load_state(path)
    assert loaded.digests() == state.digests()
    assert loaded.counters == state.counters
    for set_name in state.velocities:
        assert (loaded.velocities[set_name].digest()
                == state.velocities[set_name].digest())


def test_resume_matches_uninterrupted_run(tmp_path):
    ds = tiny_dataset()

    def straight():
        t = Trainer(ds, tr.init_state(MODEL, 0), MODEL, tcfg(
            phase1_iters=3, alternation_rounds=2))
        t.pretrain_perception()
        t.alternate()
        return t

    def interrupted():
        half = tcfg(phase1_iters=3, alternation_rounds=1)
        t = Trainer(ds, tr.init_state(MODEL, 0), MODEL, half)
        t.pretrain_perception()
        t.alternate()
        tr.save_state(tmp_path / "mid.ckpt", t.state)
        resumed = Trainer(ds, tr.load_state(tmp_path / "mid.ckpt"), MODEL,
                          tcfg(phase1_iters=3, alternation_rounds=2))
        resumed.pretrain_perception()  # counters say done; must be a no-op
        resumed.alternate()            # continues at round 1
        return resumed

    a, b = straight(), interrupted()
    assert a.state.digests() == b.state.digests()
    assert a.state.counters == b.state.counters
    for set_name in a.state.velocities:
        assert (a.state.velocities[set_name].digest()
                == b.state.velocities[set_name].digest())
    # the resumed trainer only logged round 1; those rows must agree exactly
    # with the straight run's tail, iteration numbering included
    assert [(i, p, rep.row()) for i, p, rep in b.log.rows] == \
        [(i, p, rep.row()) for i, p, rep in a.log.rows[-len(b.log.rows):]]
