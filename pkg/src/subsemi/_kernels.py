"""Compiled inner loops.

Sets are uint8 membership masks over 0-based indices.  A *key* is the mask
packed big-endian (element 0 is the top bit of byte 0); among sets of equal
size the lexicographically largest key is the lexicographically least
ascending member sequence, which is the canonical representative.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def extend_closure(table, mask, x):
    """Closure of ``mask | {x}`` for a closed ``mask``."""
    n = table.shape[0]
    out = mask.copy()
    if out[x]:
        return out
    members = np.empty(n, np.int32)
    m = 0
    for i in range(n):
        if out[i]:
            members[m] = i
            m += 1
    stack = np.empty(n, np.int32)
    out[x] = 1
    stack[0] = x
    top = 1
    while top:
        top -= 1
        y = stack[top]
        members[m] = y
        m += 1
        for k in range(m):
            z = members[k]
            p = table[y, z]
            if not out[p]:
                out[p] = 1
                stack[top] = p
                top += 1
            p = table[z, y]
            if not out[p]:
                out[p] = 1
                stack[top] = p
                top += 1
    return out


@njit(cache=True)
def close_mask(table, base, adds):
    """Closure of ``base | adds`` for a closed ``base``."""
    out = base.copy()
    for x in range(adds.shape[0]):
        if adds[x] and not out[x]:
            out = extend_closure(table, out, x)
    return out


@njit(cache=True)
def _pack_into(mask, perm, buf):
    buf[:] = 0
    for i in range(mask.shape[0]):
        if mask[i]:
            p = perm[i]
            buf[p >> 3] |= np.uint8(128 >> (p & 7))


@njit(cache=True)
def canonical_key_into(mask, perms, out):
    """Write the largest packed image of ``mask`` over all rows of ``perms``."""
    nb = out.shape[0]
    buf = np.empty(nb, np.uint8)
    _pack_into(mask, perms[0], out)
    for g in range(1, perms.shape[0]):
        _pack_into(mask, perms[g], buf)
        for b in range(nb):
            if buf[b] != out[b]:
                if buf[b] > out[b]:
                    out[:] = buf
                break


@njit(cache=True)
def canonical_key(mask, perms):
    out = np.empty((mask.shape[0] + 7) // 8, np.uint8)
    canonical_key_into(mask, perms, out)
    return out


@njit(cache=True)
def expand(table, mask, cands, perms):
    """Canonical keys and sizes of ``<mask | {c}>`` for every candidate."""
    n = table.shape[0]
    k = cands.shape[0]
    keys = np.empty((k, (n + 7) // 8), np.uint8)
    sizes = np.empty(k, np.int32)
    for c in range(k):
        r = extend_closure(table, mask, cands[c])
        sizes[c] = r.sum()
        canonical_key_into(r, perms, keys[c])
    return keys, sizes


@njit(cache=True)
def stabilizer_rows(mask, perms):
    """Rows g of ``perms`` mapping the set onto itself."""
    out = np.empty(perms.shape[0], np.int64)
    k = 0
    for g in range(perms.shape[0]):
        ok = True
        for i in range(mask.shape[0]):
            if mask[i] and not mask[perms[g, i]]:
                ok = False
                break
        if ok:
            out[k] = g
            k += 1
    return out[:k]


@njit(cache=True)
def candidates(mask, xrep, perms, use_normalizer):
    """Extension candidates of a closed set.

    ``xrep[c]`` is the least member of c's equivalent-generator class that
    lies in the extension set, or -1 when c is not an allowed extension.
    With ``use_normalizer`` one candidate per orbit of the set stabilizer
    is kept.
    """
    n = mask.shape[0]
    if use_normalizer:
        stab = stabilizer_rows(mask, perms)
    else:
        stab = np.zeros(0, np.int64)
    covered = np.zeros(n, np.uint8)
    out = np.empty(n, np.int64)
    k = 0
    for c in range(n):
        if mask[c] or xrep[c] != c or covered[c]:
            continue
        out[k] = c
        k += 1
        for s in range(stab.shape[0]):
            d = xrep[perms[stab[s], c]]
            if d >= 0:
                covered[d] = 1
    return out[:k]


@njit(cache=True)
def closed_bitmasks(table):
    """Every closed subset, as integer bitmasks, by exhaustive checking."""
    n = table.shape[0]
    out = np.empty(1024, np.int64)
    k = 0
    total = np.int64(1) << n
    for s in range(total):
        ok = True
        for i in range(n):
            if not (s >> i) & 1:
                continue
            for j in range(n):
                if (s >> j) & 1 and not (s >> table[i, j]) & 1:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            if k == out.shape[0]:
                bigger = np.empty(2 * k, np.int64)
                bigger[:k] = out
                out = bigger
            out[k] = s
            k += 1
    return out[:k]


@njit(cache=True)
def level_keys(table, gens, k, perms):
    """Canonical keys of ``<A>`` for k-subsets A of ``gens``.

    A prefix whose next element already lies in the prefix closure is
    skipped: that subset generates something of smaller rank.
    """
    n = table.shape[0]
    nb = (n + 7) // 8
    r = gens.shape[0]
    out = np.empty((1024, nb), np.uint8)
    count = 0
    if k == 0 or k > r:
        return out[:0]
    masks = np.zeros((k + 1, n), np.uint8)
    pos = np.zeros(k, np.int64)
    d = 0
    while d >= 0:
        if pos[d] > r - (k - d):
            d -= 1
            if d >= 0:
                pos[d] += 1
            continue
        c = gens[pos[d]]
        if masks[d, c]:
            pos[d] += 1
            continue
        masks[d + 1] = extend_closure(table, masks[d], c)
        if d == k - 1:
            if count == out.shape[0]:
                bigger = np.empty((2 * count, nb), np.uint8)
                bigger[:count] = out
                out = bigger
            canonical_key_into(masks[k], perms, out[count])
            count += 1
            pos[d] += 1
        else:
            d += 1
            pos[d] = pos[d - 1] + 1
    return out[:count]


@njit(cache=True)
def is_band(table, mask):
    for i in range(mask.shape[0]):
        if mask[i] and table[i, i] != i:
            return False
    return True


@njit(cache=True)
def is_commutative(table, mask):
    n = mask.shape[0]
    for i in range(n):
        if not mask[i]:
            continue
        for j in range(i + 1, n):
            if mask[j] and table[i, j] != table[j, i]:
                return False
    return True


@njit(cache=True)
def nilpotency_degree(table, mask):
    """Least k with |S^k| = 1, or 0 when S is empty or not nilpotent."""
    n = mask.shape[0]
    cur = mask.copy()
    size = cur.sum()
    if size == 0:
        return 0
    k = 1
    while size > 1:
        nxt = np.zeros(n, np.uint8)
        for a in range(n):
            if not cur[a]:
                continue
            for b in range(n):
                if mask[b]:
                    nxt[table[a, b]] = 1
        nsize = nxt.sum()
        if nsize == size:
            return 0
        cur = nxt
        size = nsize
        k += 1
    return k


@njit(cache=True)
def is_regular(table, mask):
    """Every member a has a member x with a*x*a = a."""
    n = mask.shape[0]
    for a in range(n):
        if not mask[a]:
            continue
        ok = False
        for x in range(n):
            if mask[x] and table[table[a, x], a] == a:
                ok = True
                break
        if not ok:
            return False
    return True
