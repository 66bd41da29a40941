import itertools
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

import pimcoll.codec as codec
from pimcoll import collectives as coll
from pimcoll.codec import ElementType, ReduceOp, pack_chunks, unpack_chunks
from pimcoll.collectives import (Primitive, TechniqueFlags, applicable, check_flags, make_request,
                                 resolve_preset, run_request)
from pimcoll.errors import (BufferCountMismatch, ConstraintViolation, IllegalFlags, ShortMram,
                            SplitGroupWarning)
from pimcoll.harness import load_states, member_states, seeded_inputs

from _support import cube, run_checked

ALL_FLAGS = [TechniqueFlags(*bits) for bits in itertools.product([False, True], repeat=3)]


def legal_flags(primitive, dtype):
    out = []
    for f in ALL_FLAGS:
        try:
            check_flags(f, primitive, dtype)
        except IllegalFlags:
            continue
        out.append(f)
    return out


# ---------------------------------------------------------------- flags
def test_applicability_table():
    U8, U32 = ElementType.U8, ElementType.U32
    assert applicable(Primitive.ALLTOALL, U32) == (True, True, True)
    assert applicable(Primitive.ALL_GATHER, U32) == (True, True, True)
    for p in (Primitive.REDUCE_SCATTER, Primitive.ALL_REDUCE, Primitive.REDUCE):
        assert applicable(p, U32) == (True, True, False)
        assert applicable(p, U8) == (True, True, True)
    for p in (Primitive.SCATTER, Primitive.GATHER):
        assert applicable(p, U8) == (False, True, False)
    assert applicable(Primitive.BROADCAST, U8) == (False, False, False)


def test_flag_rules():
    with pytest.raises(IllegalFlags):
        check_flags(TechniqueFlags(pr=True, cm=True), Primitive.ALLTOALL, ElementType.U64)
    with pytest.raises(IllegalFlags):
        check_flags(TechniqueFlags(im=True), Primitive.ALLTOALL, ElementType.U64)
    with pytest.raises(IllegalFlags):
        check_flags(TechniqueFlags(True, True, True), Primitive.REDUCE_SCATTER, ElementType.U32)
    with pytest.raises(IllegalFlags):
        check_flags(TechniqueFlags(pr=True), Primitive.SCATTER, ElementType.U8)
    check_flags(TechniqueFlags(im=True), Primitive.GATHER, ElementType.U8)


def test_presets_resolve_to_applicable():
    assert resolve_preset("full", Primitive.REDUCE_SCATTER, ElementType.U32) == TechniqueFlags(True, True, False)
    assert resolve_preset("full", Primitive.BROADCAST, ElementType.U8) == TechniqueFlags()
    assert resolve_preset("pr", Primitive.SCATTER, ElementType.U8) == TechniqueFlags()
    with pytest.raises(ValueError):
        resolve_preset("turbo", Primitive.ALLTOALL, ElementType.U8)


def test_size_rules():
    m, hc, mk = cube([8, 8], "10")
    with pytest.raises(ConstraintViolation) as exc:
        run_request(m, hc, make_request("alltoall", mk, 12))
    assert "multiple of 8 bytes" in exc.value.rule
    with pytest.raises(ConstraintViolation) as exc:
        run_request(m, hc, make_request("reduce_scatter", mk, 8 * 4))
    assert "group size x 8 bytes" in exc.value.rule
    with pytest.raises(ConstraintViolation):
        run_request(m, hc, make_request("scatter", mk, 8 * 4), [np.zeros(32, np.uint8)] * 8)


def test_split_group_warns_or_rejects():
    m, hc, mk = cube([4, 2, 4], "100")
    req = make_request("all_gather", mk, 8)
    seeded_inputs(m, hc, req, 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run_request(m, hc, req)
    assert any(issubclass(w.category, SplitGroupWarning) for w in caught)
    with pytest.raises(ConstraintViolation) as exc:
        run_request(m, hc, req, strict=True)
    assert "at least 8 PEs" in exc.value.rule
    m, hc, mk = cube([8, 8], "10")
    req = make_request("all_gather", mk, 8)
    seeded_inputs(m, hc, req, 0)
    run_request(m, hc, req, strict=True)


def test_host_buffer_checks():
    m, hc, mk = cube([8, 8], "10")
    with pytest.raises(BufferCountMismatch):
        run_request(m, hc, make_request("broadcast", mk, 64), [np.zeros(64, np.uint8)])
    with pytest.raises(BufferCountMismatch):
        run_request(m, hc, make_request("broadcast", mk, 64), [np.zeros(56, np.uint8)] * 8)


def test_short_mram():
    m, hc, mk = cube([8, 8], "10")
    with pytest.raises(ShortMram):
        run_request(m, hc, make_request("alltoall", mk, 64))


def test_wrong_entry_point():
    m, hc, mk = cube([8], "1")
    with pytest.raises(ValueError):
        coll.alltoall(m, hc, make_request("all_gather", mk, 8))


# ---------------------------------------------------------- semantics
def test_alltoall_labelled_slots():
    m, hc, mk = cube([8], "1")
    states = np.array([[np.repeat(np.uint8(p * 16 + d), 8) for d in range(8)] for p in range(8)]).reshape(1, 8, 64)
    load_states(m, hc, mk, 0, states)
    coll.alltoall(m, hc, make_request("alltoall", mk, 64, flags="full"))
    got = member_states(m, hc, mk, 0, 64)[0].reshape(8, 8, 8)
    for p in range(8):
        for s in range(8):
            assert (got[p, s] == s * 16 + p).all()


def test_alltoall_pair_swaps():
    m, hc, mk = cube([2, 4], "10")
    states = np.arange(8 * 16, dtype=np.uint8).reshape(4, 2, 16)
    load_states(m, hc, mk, 0, states)
    coll.alltoall(m, hc, make_request("alltoall", mk, 16, flags="full"))
    got = member_states(m, hc, mk, 0, 16)
    for g in range(4):
        assert np.array_equal(got[g, 0], np.concatenate([states[g, 0, :8], states[g, 1, :8]]))
        assert np.array_equal(got[g, 1], np.concatenate([states[g, 0, 8:], states[g, 1, 8:]]))


def test_baseline_and_full_give_same_mram():
    finals, counters = [], []
    for preset in ("baseline", "full"):
        m, hc, mk = cube([8, 8], "11")
        req = make_request("alltoall", mk, 512, flags=preset)
        seeded_inputs(m, hc, req, 3)
        counters.append(run_request(m, hc, req).counters)
        finals.append(m.load_region(np.arange(64), 0, 512))
    assert np.array_equal(*finals)
    assert counters[0] != counters[1]


def test_reduce_scatter_g8_sum():
    m, hc, mk = cube([8], "1")
    vals = np.arange(64, dtype=np.uint64).reshape(8, 8) * 3 + 1
    load_states(m, hc, mk, 0, np.stack([pack_chunks(v, ElementType.U64) for v in vals])[None])
    coll.reduce_scatter(m, hc, make_request("reduce_scatter", mk, 64, "U64", "sum", "full"))
    got = member_states(m, hc, mk, 0, 8)[0]
    for p in range(8):
        assert unpack_chunks(got[p], ElementType.U64).tolist() == [int(vals[:, p].sum())]


def test_reduce_scatter_zeros():
    m, hc, mk = cube([8], "1")
    load_states(m, hc, mk, 0, np.zeros((1, 8, 64), np.uint8))
    coll.reduce_scatter(m, hc, make_request("reduce_scatter", mk, 64, "U32", "sum", "full"))
    assert not member_states(m, hc, mk, 0, 8).any()


def test_reduce_scatter_u8_cm_without_dt():
    rep, problems = run_checked([8, 8], "10", "reduce_scatter", 128, "U8", "sum", "full", seed=5)
    assert not problems
    assert rep.counters.dt_blocks == 0


def test_all_gather_member_bytes():
    m, hc, mk = cube([8], "1")
    load_states(m, hc, mk, 0, np.repeat(np.arange(8, dtype=np.uint8), 8).reshape(1, 8, 8))
    coll.all_gather(m, hc, make_request("all_gather", mk, 8, flags="full"))
    got = member_states(m, hc, mk, 0, 64)[0]
    for p in range(8):
        assert np.array_equal(got[p], np.repeat(np.arange(8, dtype=np.uint8), 8))


def test_all_gather_split_groups_stay_in_group():
    m, hc, mk = cube([4, 2, 4], "100")
    load_states(m, hc, mk, 0, np.arange(32, dtype=np.uint8).repeat(8).reshape(8, 4, 8))
    coll.all_gather(m, hc, make_request("all_gather", mk, 8, flags="full"))
    got = member_states(m, hc, mk, 0, 32)
    for g in range(8):
        expect = np.arange(4 * g, 4 * g + 4, dtype=np.uint8).repeat(8)
        assert all(np.array_equal(row, expect) for row in got[g])


def test_all_reduce_min_with_zero_member(rng):
    m, hc, mk = cube([8], "1")
    states = rng.integers(1, 256, (1, 8, 64), dtype=np.uint8)
    states[0, 3] = 0
    load_states(m, hc, mk, 0, states)
    coll.all_reduce(m, hc, make_request("all_reduce", mk, 64, "U32", "min", "full"))
    assert not member_states(m, hc, mk, 0, 64).any()


def test_rooted_primitives(rng):
    m, hc, mk = cube([8, 8], "01")
    bufs = [rng.integers(0, 256, 128, dtype=np.uint8) for _ in range(8)]
    coll.scatter(m, hc, make_request("scatter", mk, 128, flags="full"), bufs)
    back = coll.gather(m, hc, make_request("gather", mk, 16, flags="full"))
    assert all(np.array_equal(a, b) for a, b in zip(back, bufs))
    coll.broadcast(m, hc, make_request("broadcast", mk, 128), [np.zeros(128, np.uint8)] * 8)
    assert not m.load_region(np.arange(64), 0, 128).any()
    ones = np.tile(pack_chunks(np.ones(16), ElementType.U64), (1, 8, 1))
    load_states(m, hc, mk, 0, np.broadcast_to(ones, (8, 8, 128)))
    out = coll.reduce(m, hc, make_request("reduce", mk, 128, "U64", "sum", "full"))
    assert all((unpack_chunks(o, ElementType.U64) == 8).all() for o in out)


def test_base_offset_leaves_prefix_alone(rng):
    m, hc, mk = cube([8, 8], "11")
    prefix = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    m.store_region(np.arange(64), 0, prefix)
    data = rng.integers(0, 256, (64, 512), dtype=np.uint8)
    m.store_region(np.arange(64), 64, data)
    req = make_request("alltoall", mk, 512, flags="full", base_offset=64)
    run_request(m, hc, req)
    assert np.array_equal(m.load_region(np.arange(64), 0, 64), prefix)
    got = member_states(m, hc, mk, 64, 512)[0].reshape(64, 64, 8)
    want = data.reshape(64, 64, 8)
    assert np.array_equal(got, want.transpose(1, 0, 2))


def test_groups_are_independent(rng):
    """Each group's result equals running that group's data with the other groups zeroed."""
    m, hc, mk = cube([4, 2, 8], "101")
    states = rng.integers(0, 256, (2, 32, 256), dtype=np.uint8)
    load_states(m, hc, mk, 0, states)
    run_request(m, hc, make_request("all_reduce", mk, 256, "U16", "sum", "full"))
    both = member_states(m, hc, mk, 0, 256)
    for g in range(2):
        m2, hc2, mk2 = cube([4, 2, 8], "101")
        alone = np.zeros_like(states)
        alone[g] = states[g]
        load_states(m2, hc2, mk2, 0, alone)
        run_request(m2, hc2, make_request("all_reduce", mk2, 256, "U16", "sum", "full"))
        assert np.array_equal(member_states(m2, hc2, mk2, 0, 256)[g], both[g])


def test_cross_dimension_alltoall_without_dt():
    rep, problems = run_checked([8, 8], "01", "alltoall", 64, flags="full")
    assert not problems and rep.counters.dt_blocks == 0
    rep, problems = run_checked([4, 8, 4], "011", "alltoall", 8 * 32, flags="full", ranks=2)
    assert not problems and rep.counters.dt_blocks == 0


# ------------------------------------------------------ property sweep
GEOMETRIES = [
    ([8], "1"), ([2, 4], "10"), ([2, 4], "01"), ([4, 2, 4], "100"), ([4, 2, 4], "010"), ([4, 2, 4], "101"),
    ([2, 2, 16], "101"), ([2, 4, 4], "101"), ([8, 8], "10"), ([8, 8], "01"), ([8, 8], "11"),
    ([16, 4], "01"), ([2, 12], "01"), ([8, 3], "01"), ([64], "1"), ([4, 16], "10"),
]


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(geo=st.sampled_from(GEOMETRIES), prim=st.sampled_from(list(Primitive)),
       dtype=st.sampled_from(list(ElementType)), op=st.sampled_from(list(ReduceOp)),
       words=st.integers(1, 3), seed=st.integers(0, 2 ** 32), data=st.data())
def test_oracle_equality_property(geo, prim, dtype, op, words, seed, data):
    dims, mask = geo
    G = int(np.prod([d for d, b in zip(dims, mask) if b == "1"]))
    nbytes = 8 * words if prim in (Primitive.ALL_GATHER, Primitive.GATHER, Primitive.BROADCAST) \
        else 8 * G * words
    flags = data.draw(st.sampled_from(legal_flags(prim, dtype)))
    rep, problems = run_checked(dims, mask, prim, nbytes, dtype, op, flags, seed)
    assert not problems


# ---------------------------------------------------------- accounting
class Spy:
    def __init__(self, monkeypatch):
        self.blocks = {"domain_transfer": 0, "rot_word": 0, "rot_lane": 0, "reduce_host_words": 0}
        for name in self.blocks:
            real = getattr(codec, name)
            monkeypatch.setattr(codec, name, self._wrap(name, real))

    def _wrap(self, name, real):
        def spy(*args, **kwargs):
            out = real(*args, **kwargs)
            self.blocks[name] += out.size // 64
            return out
        return spy


@pytest.mark.parametrize("prim", list(Primitive))
@pytest.mark.parametrize("preset", ["baseline", "pr", "pr+im", "full"])
def test_codec_calls_all_go_through_the_counters(monkeypatch, prim, preset):
    spy = Spy(monkeypatch)
    dtype = "U8"
    G = 16
    nbytes = 8 * G if prim not in (Primitive.ALL_GATHER, Primitive.GATHER, Primitive.BROADCAST) else 16
    rep, problems = run_checked([4, 2, 4], "101", prim, nbytes, dtype, "sum", preset, seed=1)
    assert not problems
    c = rep.counters
    assert spy.blocks["domain_transfer"] == c.dt_blocks
    assert spy.blocks["rot_word"] + spy.blocks["rot_lane"] == c.host_rot_ops
    assert spy.blocks["reduce_host_words"] == c.host_reduce_ops


def test_pipelines_do_not_touch_codec_directly():
    from pimcoll.collectives import pipelines
    assert not hasattr(pipelines, "codec")
    names = set(vars(pipelines))
    assert not names & {"domain_transfer", "rot_word", "rot_lane", "reduce_host_words"}


def test_bus_bytes_are_whole_bursts():
    rep, _ = run_checked([8, 8], "10", "all_reduce", 256, "U32", "sum", "pr")
    assert rep.counters.bus_bytes % 64 == 0 and rep.counters.bus_bytes > 0


def test_report_on_reset_machine_equals_snapshot():
    m, hc, mk = cube([8, 8], "10")
    req = make_request("alltoall", mk, 64, flags="full")
    seeded_inputs(m, hc, req, 0)
    m.reset_counters()
    rep = run_request(m, hc, req)
    assert rep.counters == m.snapshot_counters()


def test_report_serialisation():
    rep, _ = run_checked([8, 8], "10", "alltoall", 64, flags="full")
    d = rep.to_dict()
    assert list(d) == ["primitive", "dtype", "op", "dims", "mask", "group_size", "groups", "bytes_per_pe",
                       "flags", "counters"]
    assert d["counters"]["dt_blocks"] == 0 and d["group_size"] == 8 and d["groups"] == 8
    assert set(rep.breakdown) == {"pe_modulation", "bus_transfer", "domain_transfer", "host_rotation",
                                  "host_reduction", "host_staging"}
    assert list(rep.csv_row()) == list(coll.CSV_FIELDS)
    rep, _ = run_checked([8, 8], "10", "broadcast", 64, flags="full")
    assert rep.counters.host_rot_ops == 0 and rep.counters.pe_moved_bytes == 0
