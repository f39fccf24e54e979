#!/usr/bin/env python3
"""Model of the OpenSSL 1.0.1 cipher-rule engine (ssl/ssl_ciph.c).

Used only to produce the frozen expansion fixture for the cipherspec tests.
The engine keeps every cipher in one doubly linked list with an "active"
flag; rules move entries around that list exactly like ssl_cipher_apply_rule,
and aliases are bitmasks over (mkey, auth, enc, mac, ssl, strength) that are
AND-combined for "+" conjunctions.  Strength classes use the bit thresholds
of the auditor (>=128 HIGH, 112..127 MEDIUM, 1..111 LOW) instead of
OpenSSL's hand-assigned tags.

    openssl101_model.py registry.tsv --default-order   # ids in default order
    openssl101_model.py registry.tsv --fixture specs    # fixture text
"""
import sys

# --- bit assignments ---------------------------------------------------------
kRSA, kEDH, kECDHr, kECDHe, kEECDH, kPSK, kSRP, kDHr, kDHd = (1 << i for i in range(9))
aRSA, aDSS, aNULL, aECDH, aECDSA, aPSK, aSRP = (1 << i for i in range(7))
(eDES, e3DES, eRC4, eRC2, eIDEA, eNULL, eAES128, eAES256, eCAM128, eCAM256,
 eSEED, eAES128GCM, eAES256GCM) = (1 << i for i in range(13))
mMD5, mSHA1, mSHA256, mSHA384, mAEAD = (1 << i for i in range(5))
sSSLV3, sTLSV12 = 1, 2
stEXPORT, stEXP40, stEXP56, stLOW, stMEDIUM, stHIGH = (1 << i for i in range(6))
EXP_MASK = stEXPORT | stEXP40 | stEXP56
STRONG_MASK = stLOW | stMEDIUM | stHIGH

ALL_BITS = (1 << 32) - 1

MKEY = {"RSA": kRSA, "DHE": kEDH, "ECDHE": kEECDH, "ECDH/RSA": kECDHr,
        "ECDH/ECDSA": kECDHe, "PSK": kPSK, "SRP": kSRP, "DH/RSA": kDHr, "DH/DSS": kDHd}
AUTH = {"RSA": aRSA, "DSS": aDSS, "NONE": aNULL, "ECDH": aECDH, "ECDSA": aECDSA,
        "PSK": aPSK, "SRP": aSRP}
MAC = {"MD5": mMD5, "SHA1": mSHA1, "SHA256": mSHA256, "SHA384": mSHA384, "AEAD": mAEAD}
SSL = {"SSL3": sSSLV3, "TLS1_0": sSSLV3, "TLS1_1": sSSLV3, "TLS1_2": sTLSV12}


def enc_bit(enc, bits, mode):
    if enc == "AES":
        if mode == "GCM":
            return eAES128GCM if bits == 128 else eAES256GCM
        return eAES128 if bits == 128 else eAES256
    if enc == "CAMELLIA":
        return eCAM128 if bits == 128 else eCAM256
    return {"DES": eDES, "3DES": e3DES, "RC4": eRC4, "RC2": eRC2, "IDEA": eIDEA,
            "NULL": eNULL, "SEED": eSEED}[enc]


def strength(bits):
    s = 0
    if bits >= 128:
        s |= stHIGH
    elif bits >= 112:
        s |= stMEDIUM
    elif bits >= 1:
        s |= stLOW
    if 0 < bits < 56:
        s |= stEXPORT | stEXP40
    return s


class Cipher:
    def __init__(self, cid, name, kx, au, enc, bits, mode, mac, minv):
        self.id = cid
        self.name = name
        self.mkey = MKEY[kx]
        self.auth = AUTH[au]
        self.enc = enc_bit(enc, bits, mode)
        self.mac = MAC[mac]
        self.ssl = SSL[minv]
        self.strength = strength(bits)
        self.strength_bits = bits


# name -> (cipher_id, mkey, auth, enc, mac, ssl, strength); 0 means "any"
ALIASES = {
    "ALL": (0, 0, 0, ALL_BITS & ~eNULL, 0, 0, 0),
    "COMPLEMENTOFALL": (0, 0, 0, eNULL, 0, 0, 0),
    "kRSA": (0, kRSA, 0, 0, 0, 0, 0),
    "kDHr": (0, kDHr, 0, 0, 0, 0, 0),
    "kDHd": (0, kDHd, 0, 0, 0, 0, 0),
    "kEDH": (0, kEDH, 0, 0, 0, 0, 0),
    "kECDHr": (0, kECDHr, 0, 0, 0, 0, 0),
    "kECDHe": (0, kECDHe, 0, 0, 0, 0, 0),
    "kECDH": (0, kECDHr | kECDHe, 0, 0, 0, 0, 0),
    "kEECDH": (0, kEECDH, 0, 0, 0, 0, 0),
    "kPSK": (0, kPSK, 0, 0, 0, 0, 0),
    "kSRP": (0, kSRP, 0, 0, 0, 0, 0),
    "aRSA": (0, 0, aRSA, 0, 0, 0, 0),
    "aDSS": (0, 0, aDSS, 0, 0, 0, 0),
    "aNULL": (0, 0, aNULL, 0, 0, 0, 0),
    "aECDH": (0, 0, aECDH, 0, 0, 0, 0),
    "aECDSA": (0, 0, aECDSA, 0, 0, 0, 0),
    "aPSK": (0, 0, aPSK, 0, 0, 0, 0),
    "aSRP": (0, 0, aSRP, 0, 0, 0, 0),
    "DSS": (0, 0, aDSS, 0, 0, 0, 0),
    "ECDSA": (0, 0, aECDSA, 0, 0, 0, 0),
    "EDH": (0, kEDH, ALL_BITS & ~aNULL, 0, 0, 0, 0),
    "DHE": (0, kEDH, ALL_BITS & ~aNULL, 0, 0, 0, 0),
    "DH": (0, kDHr | kDHd | kEDH, 0, 0, 0, 0, 0),
    "ADH": (0, kEDH, aNULL, 0, 0, 0, 0),
    "EECDH": (0, kEECDH, ALL_BITS & ~aNULL, 0, 0, 0, 0),
    "ECDHE": (0, kEECDH, ALL_BITS & ~aNULL, 0, 0, 0, 0),
    "ECDH": (0, kECDHr | kECDHe | kEECDH, 0, 0, 0, 0, 0),
    "AECDH": (0, kEECDH, aNULL, 0, 0, 0, 0),
    "NULL": (0, 0, 0, eNULL, 0, 0, 0),
    "eNULL": (0, 0, 0, eNULL, 0, 0, 0),
    "RSA": (0, kRSA, aRSA, 0, 0, 0, 0),
    "PSK": (0, kPSK, aPSK, 0, 0, 0, 0),
    "SRP": (0, kSRP, 0, 0, 0, 0, 0),
    "DES": (0, 0, 0, eDES, 0, 0, 0),
    "3DES": (0, 0, 0, e3DES, 0, 0, 0),
    "RC4": (0, 0, 0, eRC4, 0, 0, 0),
    "RC2": (0, 0, 0, eRC2, 0, 0, 0),
    "IDEA": (0, 0, 0, eIDEA, 0, 0, 0),
    "SEED": (0, 0, 0, eSEED, 0, 0, 0),
    "AES128": (0, 0, 0, eAES128 | eAES128GCM, 0, 0, 0),
    "AES256": (0, 0, 0, eAES256 | eAES256GCM, 0, 0, 0),
    "AES": (0, 0, 0, eAES128 | eAES256 | eAES128GCM | eAES256GCM, 0, 0, 0),
    "AESGCM": (0, 0, 0, eAES128GCM | eAES256GCM, 0, 0, 0),
    "CAMELLIA128": (0, 0, 0, eCAM128, 0, 0, 0),
    "CAMELLIA256": (0, 0, 0, eCAM256, 0, 0, 0),
    "CAMELLIA": (0, 0, 0, eCAM128 | eCAM256, 0, 0, 0),
    "MD5": (0, 0, 0, 0, mMD5, 0, 0),
    "SHA1": (0, 0, 0, 0, mSHA1, 0, 0),
    "SHA": (0, 0, 0, 0, mSHA1, 0, 0),
    "SHA256": (0, 0, 0, 0, mSHA256, 0, 0),
    "SHA384": (0, 0, 0, 0, mSHA384, 0, 0),
    "SSLv3": (0, 0, 0, 0, 0, sSSLV3, 0),
    "TLSv1": (0, 0, 0, 0, 0, sSSLV3, 0),
    "TLSv1.2": (0, 0, 0, 0, 0, sTLSV12, 0),
    "EXP": (0, 0, 0, 0, 0, 0, stEXPORT),
    "EXPORT": (0, 0, 0, 0, 0, 0, stEXPORT),
    "EXPORT40": (0, 0, 0, 0, 0, 0, stEXP40),
    "EXPORT56": (0, 0, 0, 0, 0, 0, stEXP56),
    "LOW": (0, 0, 0, 0, 0, 0, stLOW),
    "MEDIUM": (0, 0, 0, 0, 0, 0, stMEDIUM),
    "HIGH": (0, 0, 0, 0, 0, 0, stHIGH),
}

CIPHER_ADD, CIPHER_KILL, CIPHER_DEL, CIPHER_ORD, CIPHER_SPECIAL = range(1, 6)


class Node:
    __slots__ = ("cipher", "active")

    def __init__(self, cipher):
        self.cipher = cipher
        self.active = False


def matches(c, cipher_id, mkey, auth, enc, mac, ssl, stren, strength_bits):
    if strength_bits >= 0:
        return c.strength_bits == strength_bits
    if cipher_id and cipher_id != c.id:
        return False
    if mkey and not (mkey & c.mkey):
        return False
    if auth and not (auth & c.auth):
        return False
    if enc and not (enc & c.enc):
        return False
    if mac and not (mac & c.mac):
        return False
    if ssl and not (ssl & c.ssl):
        return False
    if (stren & EXP_MASK) and not (stren & EXP_MASK & c.strength):
        return False
    if (stren & STRONG_MASK) and not (stren & STRONG_MASK & c.strength):
        return False
    return True


def apply_rule(lst, rule, mask=(0, 0, 0, 0, 0, 0, 0), strength_bits=-1):
    """Mutates the node list in place following ssl_cipher_apply_rule."""
    reverse = rule == CIPHER_DEL
    visit = list(reversed(lst)) if reverse else list(lst)
    for node in visit:
        if not matches(node.cipher, *mask, strength_bits):
            continue
        if rule == CIPHER_ADD:
            if not node.active:
                lst.remove(node)
                lst.append(node)
                node.active = True
        elif rule == CIPHER_ORD:
            if node.active:
                lst.remove(node)
                lst.append(node)
        elif rule == CIPHER_DEL:
            if node.active:
                lst.remove(node)
                lst.insert(0, node)
                node.active = False
        elif rule == CIPHER_KILL:
            lst.remove(node)


def strength_sort(lst):
    bits = sorted({n.cipher.strength_bits for n in lst if n.active}, reverse=True)
    for b in bits:
        apply_rule(lst, CIPHER_ORD, strength_bits=b)


def alias_lookup(name, ciphers_by_name):
    if name in ciphers_by_name:
        c = ciphers_by_name[name]
        return (c.id, 0, 0, 0, 0, 0, 0)
    if name not in ALIASES:
        raise ValueError("unknown cipher keyword: " + name)
    return ALIASES[name]


def combine(masks):
    # the strength field is two independent sub-masks (export / strong)
    cid = 0
    out = [0] * 7
    for m in masks:
        if m[0]:
            cid = m[0]
        fields = list(m[1:6]) + [m[6] & EXP_MASK, m[6] & STRONG_MASK]
        for i, v in enumerate(fields):
            if v:
                out[i] = (out[i] & v) if out[i] else v
                if out[i] == 0:
                    return None
    return (cid, *out[:5], out[5] | out[6])


NAME_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-.")
SEPARATORS = set(": ,")


def process_rulestr(lst, rule_str, ciphers_by_name):
    if rule_str == "":
        raise ValueError("empty specification")
    l = 0
    n = len(rule_str)
    while l < n:
        ch = rule_str[l]
        if ch == "-":
            rule = CIPHER_DEL
            l += 1
        elif ch == "+":
            rule = CIPHER_ORD
            l += 1
        elif ch == "!":
            rule = CIPHER_KILL
            l += 1
        elif ch == "@":
            rule = CIPHER_SPECIAL
            l += 1
        else:
            rule = CIPHER_ADD
        if ch in SEPARATORS:
            l += 1
            continue
        masks = []
        found = True
        buf = ""
        while True:
            start = l
            while l < n and rule_str[l] in NAME_CHARS:
                l += 1
            buf = rule_str[start:l]
            if not buf:
                raise ValueError("unexpected character at offset %d" % l)
            if rule == CIPHER_SPECIAL:
                break
            m = alias_lookup(buf, ciphers_by_name)
            masks.append(m)
            if l < n and rule_str[l] == "+":
                l += 1
                continue
            break
        if rule == CIPHER_SPECIAL:
            if buf != "STRENGTH":
                raise ValueError("unknown special command @" + buf)
            strength_sort(lst)
            while l < n and rule_str[l] not in SEPARATORS:
                l += 1
        else:
            mask = combine(masks)
            if mask is not None:
                apply_rule(lst, rule, mask)


def load_registry(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            out.append(Cipher(int(cols[0], 16), cols[1], cols[2], cols[3], cols[4],
                              int(cols[5]), cols[6], cols[7], cols[8]))
    return out


def default_order(ciphers):
    """The preference ordering ssl_create_cipher_list builds before any rule."""
    lst = [Node(c) for c in sorted(ciphers, key=lambda c: -c.id)]
    apply_rule(lst, CIPHER_ADD, (0, kEECDH, 0, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_DEL, (0, kEECDH, 0, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_ADD, (0, 0, 0, eAES128 | eAES256 | eAES128GCM | eAES256GCM, 0, 0, 0))
    apply_rule(lst, CIPHER_ADD)
    apply_rule(lst, CIPHER_ORD, (0, 0, 0, 0, mMD5, 0, 0))
    apply_rule(lst, CIPHER_ORD, (0, 0, aNULL, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_ORD, (0, 0, aECDH, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_ORD, (0, kRSA, 0, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_ORD, (0, kPSK, 0, 0, 0, 0, 0))
    apply_rule(lst, CIPHER_ORD, (0, 0, 0, eRC4, 0, 0, 0))
    strength_sort(lst)
    apply_rule(lst, CIPHER_DEL)
    return [n.cipher for n in lst]


def expand(ciphers, spec):
    lst = [Node(c) for c in ciphers]  # registry file order is the pool order
    by_name = {c.name: c for c in ciphers}
    process_rulestr(lst, spec, by_name)
    return [n.cipher.name for n in lst if n.active]


def main():
    ciphers = load_registry(sys.argv[1])
    if sys.argv[2] == "--default-order":
        for c in default_order(ciphers):
            print("%04x %s" % (c.id, c.name))
        return
    if sys.argv[2] == "--fixture":
        with open(sys.argv[3]) as f:
            specs = [s.rstrip("\n") for s in f if s.strip() and not s.startswith("#")]
        for spec in specs:
            print("spec\t" + spec)
            for name in expand(ciphers, spec):
                print(name)
            print("end")
        return
    raise SystemExit("usage: openssl101_model.py registry.tsv --default-order|--fixture specs")


if __name__ == "__main__":
    main()
