"""Independent from-scratch primitives used only to cross-check the build.

Pure-Python SHA-256 and AES-128 (encrypt only), sharing no code with the
package or with hashlib/cryptography. Slow and only for tests: if these and
the main build agree on the golden vectors and on random inputs, the
primitives are bit-exact.
"""

from __future__ import annotations

# --- SHA-256 ---------------------------------------------------------------

_K = [
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1,
    0x923F82A4, 0xAB1C5ED5, 0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3,
    0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174, 0xE49B69C1, 0xEFBE4786,
    0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147,
    0x06CA6351, 0x14292967, 0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13,
    0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85, 0xA2BFE8A1, 0xA81A664B,
    0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A,
    0x5B9CCA4F, 0x682E6FF3, 0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208,
    0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
]

_H0 = [
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
]

_MASK = 0xFFFFFFFF


def _rotr(x: int, r: int) -> int:
    return ((x >> r) | (x << (32 - r))) & _MASK


def sha256(message: bytes) -> bytes:
    length = len(message) * 8
    message += b"\x80"
    while len(message) % 64 != 56:
        message += b"\x00"
    message += length.to_bytes(8, "big")

    h = list(_H0)
    for start in range(0, len(message), 64):
        block = message[start : start + 64]
        w = [int.from_bytes(block[i : i + 4], "big") for i in range(0, 64, 4)]
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & _MASK)
        a, b, c, d, e, f, g, hh = h
        for i in range(64):
            s1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
            ch = (e & f) ^ (~e & g)
            temp1 = (hh + s1 + ch + _K[i] + w[i]) & _MASK
            s0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
            maj = (a & b) ^ (a & c) ^ (b & c)
            temp2 = (s0 + maj) & _MASK
            hh, g, f, e, d, c, b, a = (
                g, f, e, (d + temp1) & _MASK, c, b, a, (temp1 + temp2) & _MASK,
            )
        h = [(x + y) & _MASK for x, y in zip(h, [a, b, c, d, e, f, g, hh])]
    return b"".join(x.to_bytes(4, "big") for x in h)


def oracle_hash128(message: bytes) -> bytes:
    return sha256(message)[:16]


# --- AES-128 (encrypt only) ---------------------------------------------------


def _gf_mul(a: int, b: int) -> int:
    result = 0
    for _ in range(8):
        if b & 1:
            result ^= a
        high = a & 0x80
        a = (a << 1) & 0xFF
        if high:
            a ^= 0x1B
        b >>= 1
    return result


def _build_sbox() -> list[int]:
    # Multiplicative inverse in GF(2^8) followed by the affine transform.
    inverse = [0] * 256
    for x in range(1, 256):
        for y in range(1, 256):
            if _gf_mul(x, y) == 1:
                inverse[x] = y
                break
    sbox = []
    for x in range(256):
        b = inverse[x]
        value = 0
        for bit in range(8):
            value |= (
                ((b >> bit) ^ (b >> ((bit + 4) % 8)) ^ (b >> ((bit + 5) % 8))
                 ^ (b >> ((bit + 6) % 8)) ^ (b >> ((bit + 7) % 8)) ^ (0x63 >> bit))
                & 1
            ) << bit
        sbox.append(value)
    return sbox


_SBOX = _build_sbox()
_RCON = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36]


def _expand_key(key: bytes) -> list[list[int]]:
    words = [list(key[i : i + 4]) for i in range(0, 16, 4)]
    for i in range(4, 44):
        temp = list(words[i - 1])
        if i % 4 == 0:
            temp = temp[1:] + temp[:1]
            temp = [_SBOX[b] for b in temp]
            temp[0] ^= _RCON[i // 4 - 1]
        words.append([w ^ t for w, t in zip(words[i - 4], temp)])
    return [sum(words[4 * r : 4 * r + 4], []) for r in range(11)]


def _sub_bytes(state: list[int]) -> list[int]:
    return [_SBOX[b] for b in state]


def _shift_rows(state: list[int]) -> list[int]:
    # state is column-major: state[4*c + r]
    out = list(state)
    for r in range(1, 4):
        row = [state[4 * c + r] for c in range(4)]
        row = row[r:] + row[:r]
        for c in range(4):
            out[4 * c + r] = row[c]
    return out


def _mix_columns(state: list[int]) -> list[int]:
    out = []
    for c in range(4):
        col = state[4 * c : 4 * c + 4]
        out += [
            _gf_mul(col[0], 2) ^ _gf_mul(col[1], 3) ^ col[2] ^ col[3],
            col[0] ^ _gf_mul(col[1], 2) ^ _gf_mul(col[2], 3) ^ col[3],
            col[0] ^ col[1] ^ _gf_mul(col[2], 2) ^ _gf_mul(col[3], 3),
            _gf_mul(col[0], 3) ^ col[1] ^ col[2] ^ _gf_mul(col[3], 2),
        ]
    return out


def _add_round_key(state: list[int], round_key: list[int]) -> list[int]:
    return [s ^ k for s, k in zip(state, round_key)]


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    if len(key) != 16 or len(block) != 16:
        raise ValueError("key and block must be 16 bytes")
    round_keys = _expand_key(key)
    state = _add_round_key(list(block), round_keys[0])
    for rnd in range(1, 10):
        state = _add_round_key(
            _mix_columns(_shift_rows(_sub_bytes(state))), round_keys[rnd]
        )
    state = _add_round_key(_shift_rows(_sub_bytes(state)), round_keys[10])
    return bytes(state)


def oracle_prf(key: bytes, block: bytes) -> bytes:
    return aes128_encrypt_block(key, block)


def oracle_trapdoor(mk: bytes, field: str, value: str) -> bytes:
    canonical = field.lower().encode("utf-8") + b"\x1f" + value.strip().encode("utf-8")
    return oracle_prf(mk, oracle_hash128(canonical))


def oracle_permutation(seed: bytes, n: int) -> list[int]:
    """Independent reimplementation of the seeded Fisher-Yates."""
    blocks_needed = 0
    stream = b""

    def next_u64() -> int:
        nonlocal blocks_needed, stream
        while len(stream) < 8:
            stream += aes128_encrypt_block(seed, blocks_needed.to_bytes(16, "big"))
            blocks_needed += 1
        value = int.from_bytes(stream[:8], "big")
        stream = stream[8:]
        return value

    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = next_u64()
            if r < limit:
                j = r % bound
                break
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def oracle_build_index(
    mk: bytes, keywords: list[tuple[str, str]], id_string: str, seed: bytes
) -> list[bytes]:
    id_digest = oracle_hash128(id_string.encode("utf-8"))
    codewords = [
        oracle_prf(oracle_trapdoor(mk, field, value), id_digest)
        for field, value in keywords
    ]
    perm = oracle_permutation(seed, len(keywords))
    slots: list[bytes] = [b""] * len(keywords)
    for j, codeword in enumerate(codewords):
        slots[perm[j]] = codeword
    return slots
