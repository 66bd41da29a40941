"""Baseline and optimized pipelines for the eight primitives.

All bursts of a cube slice are processed as one numpy batch; counters are
charged per block through the machine facade, so batching changes nothing
observable.  Slot and position arithmetic follows :mod:`.layout`:

* pre-kernel (PR): member ``(m, a)`` stores at position ``(s, b)`` the slot
  destined to member ``(m + s, b)``;
* host: the burst read from entangled group ``a`` at position ``(s, b)`` is
  translated by ``-s`` and written to entangled group ``b`` at position
  ``(s, a)``;
* post-kernel (PR): member ``(j, b)`` moves position ``(j - q, e)`` to slot
  ``(q, e)``.

Positions and slots are numbered ``lane_part + w * eg_part``.

The baseline never uses PE kernels: it reads every burst, domain-transfers
and spills it to host memory, builds each output burst by rotating and
merging the source bursts it needs (one ``rot_word`` per distinct source and
shift), reduces if required, spills the result, transfers it back and
writes.
"""
from __future__ import annotations

import numpy as np

from ..errors import BufferCountMismatch, ShortMram
from ..topology import CHIPS_PER_RANK
from .layout import GroupLayout
from .request import CommRequest, Primitive

_J = np.arange(CHIPS_PER_RANK)


def _translate(m, lay: GroupLayout, blocks, u, pim: bool):
    """Move every word from member ``x`` to member ``x - u`` of its group (lane parts)."""
    rot = m.rot_lane if pim else m.rot_word
    u = np.broadcast_to(np.asarray(u, dtype=np.int64), blocks.shape[:-1])
    for shift, width in lay.translation_calls(u):
        blocks = rot(blocks, shift, width)
    return blocks


def _spill(m, blocks):
    return m.host_unstage(m.host_stage(blocks)).reshape(blocks.shape)


def _pre_perm(lay: GroupLayout):
    """Pre-kernel permutation per cube PE over ``G`` positions."""
    w, k = lay.w, lay.k
    ml = lay.lane_member[lay.pes % CHIPS_PER_RANK]
    b = np.arange(k)
    perm = lay.add[ml][:, None, :] + w * b[None, :, None]     # (P, k, w)
    return perm.reshape(lay.num_pes, -1)


def _post_perm(lay: GroupLayout):
    w, k = lay.w, lay.k
    ml = lay.lane_member[lay.pes % CHIPS_PER_RANK]
    b = np.arange(k)
    perm = lay.sub[ml][:, None, :] + w * b[None, :, None]
    return perm.reshape(lay.num_pes, -1)


def _check_region(m, lay: GroupLayout, req: CommRequest, nbytes: int):
    need = req.base_offset + nbytes
    if int(m.sizes[: lay.num_pes].min()) < need:
        raise ShortMram(f"every cube PE must hold at least {need} bytes of MRAM")


def _rot_merge(m, staged, src_blk, src_lane, chunk: int = 1 << 15):
    """Assemble host-domain blocks whose word ``j`` is word ``src_lane[n, j]``
    of staged block ``src_blk[n, j]``.

    Each output block costs one ``rot_word`` per distinct (source block,
    shift) pair it needs.  Outputs are built in chunks to bound memory; the
    count does not depend on the chunking.
    """
    n_out = src_blk.shape[0]
    n_in = staged.shape[0]
    out = np.empty((n_out, 64), dtype=np.uint8)
    for lo in range(0, n_out, chunk):
        blk = src_blk[lo: lo + chunk]
        n = blk.shape[0]
        shift = (src_lane[lo: lo + chunk] - _J[None, :]) % 8
        key = (np.arange(n)[:, None] * n_in + blk) * 8 + shift
        uniq, inv = np.unique(key, return_inverse=True)
        rotated = m.rot_word(staged[(uniq // 8) % n_in], uniq % 8)
        words = rotated.reshape(-1, 8, 8)
        out[lo: lo + n] = words[inv.reshape(n, 8), _J[None, :]].reshape(n, 64)
    return out


def _lane_view(lay: GroupLayout, egs):
    """Group and member of every lane of the given entangled groups: ``(n, 8)`` each."""
    pes = np.asarray(egs)[..., None] * CHIPS_PER_RANK + _J
    return lay.pe_group[pes], lay.pe_member[pes]


def _baseline_front(m, egs, offs):
    blocks = m.read_bursts(egs, offs)
    return _spill(m, m.domain_transfer(blocks))


def _baseline_back(m, host_blocks, egs, offs):
    out = _spill(m, host_blocks)
    m.write_bursts(egs, offs, m.domain_transfer(out))


# ------------------------------------------------------------------ AlltoAll
def alltoall(m, lay: GroupLayout, req: CommRequest):
    G, w, E = lay.group_size, lay.w, lay.num_egs
    S = req.bytes_per_pe // G
    ws = S // 8
    base = req.base_offset
    _check_region(m, lay, req, req.bytes_per_pe)
    e, t, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(G), np.arange(ws), indexing="ij"))
    src_off = base + t * S + 8 * wd

    if not req.flags.pr:
        staged = _baseline_front(m, e, src_off)
        grp, mem = _lane_view(lay, e)
        src_pe = lay.table[grp, t[:, None]]
        src_blk = ((src_pe // 8) * G + mem) * ws + wd[:, None]
        out = _rot_merge(m, staged, src_blk, src_pe % 8)
        _baseline_back(m, out, e, src_off)
        return None

    m.pe_kernel_permute(lay.pes, base, S, _pre_perm(lay))
    s, b = t % w, t // w
    a = lay.eg_pos[e]
    dst_eg = lay.family_egs[lay.eg_family[e], b]
    dst_off = base + (s + w * a) * S + 8 * wd
    blocks = m.read_bursts(e, src_off)
    u = lay.neg[s]
    if req.flags.cm:
        out = _translate(m, lay, blocks, u, pim=True)
    elif req.flags.im:
        out = m.domain_transfer(_translate(m, lay, m.domain_transfer(blocks), u, pim=False))
    else:
        host = _spill(m, m.domain_transfer(blocks))
        out = m.domain_transfer(_spill(m, _translate(m, lay, host, u, pim=False)))
    m.write_bursts(dst_eg, dst_off, out)
    m.pe_kernel_permute(lay.pes, base, S, _post_perm(lay))
    return None


# ------------------------------------------------- reduction front half
def _reduce_front(m, lay: GroupLayout, req: CommRequest, src_base: int):
    """PR pipelines up to the vertical reduction.

    Returns reduced blocks shaped ``(F, k, ws, 64)`` in the host domain, or in
    the PIM domain when ``cm`` is set (8-bit elements only).
    """
    G, w, k = lay.group_size, lay.w, lay.k
    S = req.bytes_per_pe // G
    ws = S // 8
    F = lay.family_egs.shape[0]
    # operand axes (a, s) first, then output axes (f, b, wd)
    a, s, f, b, wd = np.meshgrid(np.arange(k), np.arange(w), np.arange(F), np.arange(k), np.arange(ws),
                                 indexing="ij")
    egs = lay.family_egs[f, a]
    offs = src_base + (s + w * b) * S + 8 * wd
    blocks = m.read_bursts(egs.reshape(-1), offs.reshape(-1)).reshape(G, -1, 64)
    u = lay.neg[s.reshape(G, -1)]
    if req.flags.cm:
        ops = _translate(m, lay, blocks, u, pim=True)
    elif req.flags.im:
        ops = m.domain_transfer(_translate(m, lay, blocks, u, pim=True))
    else:
        host = _spill(m, m.domain_transfer(blocks))
        ops = _translate(m, lay, host, u, pim=False)
    acc = ops[0]
    for r in range(1, G):
        acc = m.reduce(acc, ops[r], req.dtype, req.op)
    if not (req.flags.im or req.flags.cm):
        acc = _spill(m, acc)
    return acc.reshape(F, k, ws, 64)


def _baseline_reduce(m, lay: GroupLayout, req: CommRequest):
    """Baseline global reduction of slot ``p`` onto member ``p`` of every group.

    Returns ``(egs, member, wd, reduced host blocks)``, one block per
    entangled group and word, not yet spilled.
    """
    G, E = lay.group_size, lay.num_egs
    S = req.bytes_per_pe // G
    ws = S // 8
    base = req.base_offset
    e_in, t_in, wd_in = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(G), np.arange(ws),
                                                            indexing="ij"))
    staged = _baseline_front(m, e_in, base + t_in * S + 8 * wd_in)

    e, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(ws), indexing="ij"))
    grp, mem = _lane_view(lay, e)
    acc = None
    for r in range(G):
        src_pe = lay.table[grp, r]
        src_blk = ((src_pe // 8) * G + mem) * ws + wd[:, None]
        operand = _rot_merge(m, staged, src_blk, src_pe % 8)
        acc = operand if acc is None else m.reduce(acc, operand, req.dtype, req.op)
    return e, mem, wd, acc


# ------------------------------------------------------------ ReduceScatter
def reduce_scatter(m, lay: GroupLayout, req: CommRequest):
    base = req.base_offset
    _check_region(m, lay, req, req.bytes_per_pe)
    if not req.flags.pr:
        e, _, wd, acc = _baseline_reduce(m, lay, req)
        _baseline_back(m, acc, e, base + 8 * wd)
        return None
    m.pe_kernel_permute(lay.pes, base, req.bytes_per_pe // lay.group_size, _pre_perm(lay))
    red = _reduce_front(m, lay, req, base)
    F, k, ws = red.shape[:3]
    f, b, wd = np.meshgrid(np.arange(F), np.arange(k), np.arange(ws), indexing="ij")
    out = red.reshape(-1, 64)
    if not req.flags.cm:
        out = m.domain_transfer(out)
    m.write_bursts(lay.family_egs[f, b].reshape(-1), (base + 8 * wd).reshape(-1), out)
    return None


# ---------------------------------------------------------------- AllReduce
def all_reduce(m, lay: GroupLayout, req: CommRequest):
    G, w = lay.group_size, lay.w
    S = req.bytes_per_pe // G
    base = req.base_offset
    _check_region(m, lay, req, req.bytes_per_pe)
    if not req.flags.pr:
        # reduce each slot once at its owner, then copy it to every member
        acc = _baseline_reduce(m, lay, req)[3]
        staged = _spill(m, acc)
        ws = S // 8
        e, t, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(lay.num_egs), np.arange(G), np.arange(ws),
                                                        indexing="ij"))
        grp, _ = _lane_view(lay, e)
        src_pe = lay.table[grp, t[:, None]]
        out = _rot_merge(m, staged, (src_pe // 8) * ws + wd[:, None], src_pe % 8)
        _baseline_back(m, out, e, base + t * S + 8 * wd)
        return None

    m.pe_kernel_permute(lay.pes, base, S, _pre_perm(lay))
    red = _reduce_front(m, lay, req, base)
    F, k, ws = red.shape[:3]
    s = np.arange(w)[:, None, None, None]
    copies = np.broadcast_to(red[None], (w, F, k, ws, 64))
    u = np.broadcast_to(lay.neg[s], (w, F, k, ws))
    if req.flags.cm:
        out = _translate(m, lay, copies, u, pim=True)
    elif req.flags.im:
        pim = m.domain_transfer(red)
        out = _translate(m, lay, np.broadcast_to(pim[None], copies.shape), u, pim=True)
    else:
        host = _spill(m, _translate(m, lay, copies, u, pim=False))
        out = m.domain_transfer(host)
    c, s, f, b, wd = np.meshgrid(np.arange(k), np.arange(w), np.arange(F), np.arange(k), np.arange(ws),
                                 indexing="ij")
    egs = lay.family_egs[f, c]
    offs = base + (s + w * b) * S + 8 * wd
    blocks = np.broadcast_to(out[None], (k,) + out.shape)
    m.write_bursts(egs.reshape(-1), offs.reshape(-1), blocks.reshape(-1, 64))
    m.pe_kernel_permute(lay.pes, base, S, _post_perm(lay))
    return None


# ---------------------------------------------------------------- AllGather
def all_gather(m, lay: GroupLayout, req: CommRequest):
    G, w, k, E = lay.group_size, lay.w, lay.k, lay.num_egs
    B = req.bytes_per_pe
    nb = B // 8
    base = req.base_offset
    _check_region(m, lay, req, B)
    e, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(nb), indexing="ij"))

    if not req.flags.pr:
        staged = _baseline_front(m, e, base + 8 * wd)
        eo, t, wo = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(G), np.arange(nb), indexing="ij"))
        grp, _ = _lane_view(lay, eo)
        src_pe = lay.table[grp, t[:, None]]
        src_blk = (src_pe // 8) * nb + wo[:, None]
        out = _rot_merge(m, staged, src_blk, src_pe % 8)
        _baseline_back(m, out, eo, base + t * B + 8 * wo)
        return None

    blocks = m.read_bursts(e, base + 8 * wd)
    s = np.arange(w)[:, None]
    u = np.broadcast_to(lay.neg[s], (w, e.size))
    copies = np.broadcast_to(blocks[None], (w,) + blocks.shape)
    if req.flags.cm:
        out = _translate(m, lay, copies, u, pim=True)
    elif req.flags.im:
        host = m.domain_transfer(blocks)
        out = m.domain_transfer(_translate(m, lay, np.broadcast_to(host[None], copies.shape), u, pim=False))
    else:
        host = _spill(m, m.domain_transfer(blocks))
        moved = _spill(m, _translate(m, lay, np.broadcast_to(host[None], copies.shape), u, pim=False))
        out = m.domain_transfer(moved)
    # write each shifted copy to every entangled group of the family
    c = np.arange(k)[:, None, None]
    dst_eg = lay.family_egs[lay.eg_family[e][None, None, :], c]
    pos = s[None] + w * lay.eg_pos[e][None, None, :]
    dst_off = base + pos * B + 8 * wd[None, None, :]
    shape = (k, w, e.size)
    m.write_bursts(np.broadcast_to(dst_eg, shape).reshape(-1), np.broadcast_to(dst_off, shape).reshape(-1),
                   np.broadcast_to(out[None], (k,) + out.shape).reshape(-1, 64))
    m.pe_kernel_permute(lay.pes, base, B, _post_perm(lay))
    return None


# ----------------------------------------------------------- rooted primitives
def _host_matrix(lay: GroupLayout, host_buffers, nbytes: int):
    if host_buffers is None or len(host_buffers) != lay.num_groups:
        got = 0 if host_buffers is None else len(host_buffers)
        raise BufferCountMismatch(f"expected {lay.num_groups} host buffers, got {got}",
                                  rule="one host buffer per communication group")
    rows = [np.asarray(hb, dtype=np.uint8).reshape(-1) for hb in host_buffers]
    if any(r.size != nbytes for r in rows):
        raise BufferCountMismatch(f"every host buffer must hold {nbytes} bytes",
                                  rule="host buffer size must match the request")
    return np.stack(rows)


def scatter(m, lay: GroupLayout, req: CommRequest, host_buffers):
    G, E = lay.group_size, lay.num_egs
    B = req.bytes_per_pe
    S = B // G
    ws = S // 8
    base = req.base_offset
    words = _host_matrix(lay, host_buffers, B).reshape(lay.num_groups, G * ws, 8)
    e, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(ws), indexing="ij"))
    grp, mem = _lane_view(lay, e)
    host = words[grp, mem * ws + wd[:, None]].reshape(-1, 64)
    if not req.flags.im:
        host = _spill(m, host)
    m.write_bursts(e, base + 8 * wd, m.domain_transfer(host))
    return None


def gather(m, lay: GroupLayout, req: CommRequest):
    G, E = lay.group_size, lay.num_egs
    B = req.bytes_per_pe
    nb = B // 8
    base = req.base_offset
    _check_region(m, lay, req, B)
    e, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(E), np.arange(nb), indexing="ij"))
    host = m.domain_transfer(m.read_bursts(e, base + 8 * wd))
    if not req.flags.im:
        host = _spill(m, host)
    grp, mem = _lane_view(lay, e)
    out = np.zeros((lay.num_groups, G * nb, 8), dtype=np.uint8)
    out[grp, mem * nb + wd[:, None]] = host.reshape(-1, 8, 8)
    return [row.reshape(-1) for row in out]


def reduce(m, lay: GroupLayout, req: CommRequest):
    G, w = lay.group_size, lay.w
    B = req.bytes_per_pe
    S = B // G
    ws = S // 8
    base = req.base_offset
    _check_region(m, lay, req, B)
    out = np.zeros((lay.num_groups, G * ws, 8), dtype=np.uint8)

    if not req.flags.pr:
        e, slot, wd, acc = _baseline_reduce(m, lay, req)
        host = _spill(m, acc)
        grp, _ = _lane_view(lay, e)
        out[grp, slot * ws + wd[:, None]] = host.reshape(-1, 8, 8)
        return [row.reshape(-1) for row in out]

    # reorder into scratch right after the data so members keep their input
    m.pe_kernel_permute(lay.pes, base, S, _pre_perm(lay), dst_base=base + B)
    red = _reduce_front(m, lay, req, base + B)
    F, k = red.shape[:2]
    f, b, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(F), np.arange(k), np.arange(ws), indexing="ij"))
    blocks = red.reshape(-1, 8, 8)
    if req.flags.cm:
        # 8-bit elements: each byte is a whole element, so the host stores
        # beat j of lane i straight to element j of that lane's word.
        blocks = blocks.swapaxes(1, 2)
    grp, _ = _lane_view(lay, lay.family_egs[f, b])
    slot = lay.lane_member[_J][None, :] + w * b[:, None]
    out[grp, slot * ws + wd[:, None]] = blocks
    return [row.reshape(-1) for row in out]


def broadcast(m, lay: GroupLayout, req: CommRequest, host_buffers):
    B = req.bytes_per_pe
    nb = B // 8
    base = req.base_offset
    k = lay.k
    words = _host_matrix(lay, host_buffers, B).reshape(lay.num_groups, nb, 8)
    F = lay.family_egs.shape[0]
    f, wd = (x.reshape(-1) for x in np.meshgrid(np.arange(F), np.arange(nb), indexing="ij"))
    grp, _ = _lane_view(lay, lay.family_egs[f, 0])
    pim = m.domain_transfer(words[grp, wd[:, None]].reshape(-1, 64))
    c = np.arange(k)[:, None]
    egs = lay.family_egs[f[None, :], c]
    offs = np.broadcast_to(base + 8 * wd[None, :], egs.shape)
    m.write_bursts(egs.reshape(-1), offs.reshape(-1), np.broadcast_to(pim[None], (k,) + pim.shape).reshape(-1, 64))
    return None


DISPATCH = {
    Primitive.ALLTOALL: alltoall,
    Primitive.REDUCE_SCATTER: reduce_scatter,
    Primitive.ALL_GATHER: all_gather,
    Primitive.ALL_REDUCE: all_reduce,
    Primitive.GATHER: gather,
    Primitive.REDUCE: reduce,
}
ROOT_INPUT = {
    Primitive.SCATTER: scatter,
    Primitive.BROADCAST: broadcast,
}
