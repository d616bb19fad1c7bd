"""Command line front end: ``weil <command> [options]``.

Every command reads a form from ``--symbol`` or ``--input`` (form JSON),
validates it before computing anything, and writes canonical JSON
(sorted keys) unless ``--pretty`` asks for a plain text table.
Exit codes: 0 success, 1 a cross-check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .exactnum import fraction_str
from .fqm import (
    DiscForm,
    FormError,
    builtin,
    corpus_symbols,
    isotropic_subgroups,
    symbol_signature,
)
from .intbasis import integral_basis, natural_basis, verify_integrality
from .invariants import invariant_report
from .weil import MpWord, check_relations, cyclic_decomposition, rho_word

SCHEMA_VERSION = 1


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


def _emit(obj: dict, args, out=None) -> None:
    obj = dict(obj, schema_version=SCHEMA_VERSION)
    if args.pretty:
        text = _table(obj)
    else:
        text = json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2)
    target = out or getattr(args, "out", None)
    if target:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _table(obj: dict, indent: int = 0) -> str:
    lines = []
    pad = " " * indent
    for k in sorted(obj):
        v = obj[k]
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(_table(v, indent + 2))
        elif isinstance(v, list) and v and isinstance(v[0], (list, dict)):
            lines.append(f"{pad}{k}: [{len(v)} entries]")
        else:
            lines.append(f"{pad}{k}: {v}")
    return "\n".join(lines)


def _load_form(args) -> DiscForm:
    if bool(args.symbol) == bool(args.input):
        raise InputError("give exactly one of --symbol and --input")
    try:
        if args.symbol:
            return builtin(args.symbol)
        with open(args.input, encoding="utf-8") as fh:
            obj = json.load(fh)
        return DiscForm.from_json(obj.get("form", obj))
    except FormError as exc:
        raise InputError(str(exc)) from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from exc


def _form_json(D: DiscForm) -> dict:
    out = D.to_json()
    if D.label:
        out["label"] = D.label
    return out


def _check_size(D: DiscForm, args) -> None:
    if D.size > args.max_order:
        raise InputError(f"|D| = {D.size} exceeds --max-order {args.max_order}")


# ---------------------------------------------------------------------------
# commands

def cmd_build(args) -> int:
    D = _load_form(args)
    _emit({"form": _form_json(D), "order": D.size, "signature": D.signature}, args)
    return 0


def cmd_info(args) -> int:
    D = _load_form(args)
    info = {
        "order": D.size,
        "level": D.level,
        "signature": D.signature,
        "conductor": D.conductor,
        "orders": list(D.orders),
        "isotropic_elements": int(len(D.isotropic_elements)),
    }
    if D.size <= args.max_order:
        census: dict[str, int] = {}
        for H in isotropic_subgroups(D, args.max_order):
            census[str(H.order)] = census.get(str(H.order), 0) + 1
        info["isotropic_subgroups"] = dict(sorted(census.items(), key=lambda kv: int(kv[0])))
    _emit(info, args)
    return 0


def cmd_rep(args) -> int:
    D = _load_form(args)
    _check_size(D, args)
    try:
        w = MpWord.parse(args.word or "")
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(rho_word(D, w).to_json(), args)
    return 0


def cmd_basis(args) -> int:
    D = _load_form(args)
    _check_size(D, args)
    B = integral_basis(D, args.max_order)
    obj = {"basis": B.to_json()}
    code = 0
    if args.verify:
        rep = verify_integrality(D, B)
        obj["verification"] = rep.to_json()
        code = 0 if rep.verdict else 1
    _emit(obj, args)
    return code


def _form_checks(D: DiscForm, symbol: str | None) -> dict[str, bool]:
    checks = dict(check_relations(D))
    checks["milgram"] = D.gauss_sum == _milgram_rhs(D)
    if symbol:
        checks["signature_matches_symbol"] = D.signature == symbol_signature(symbol)
    return checks


def _milgram_rhs(D: DiscForm):
    from .exactnum import CycNumber, sqrt_nat

    M = D.conductor
    return CycNumber.root(D.signature * M // 8, M) * sqrt_nat(D.size, M)


def cmd_verify(args) -> int:
    D = _load_form(args)
    _check_size(D, args)
    checks = _form_checks(D, args.symbol)
    ok = all(checks.values())
    _emit({"checks": checks, "ok": ok}, args)
    return 0 if ok else 1


def cmd_invariants(args) -> int:
    D = _load_form(args)
    _check_size(D, args)
    method = args.method or "all"
    try:
        rep = invariant_report(D, method)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    obj = rep.to_json()
    if args.emit_basis:
        with open(args.emit_basis, "w", encoding="utf-8") as fh:
            json.dump({"basis": rep.basis, "form": _form_json(D), "schema_version": SCHEMA_VERSION},
                      fh, sort_keys=True, indent=2)
            fh.write("\n")
    _emit(obj, args)
    return 0 if rep.agreement and rep.rational else 1


def cmd_decompose(args) -> int:
    D = _load_form(args)
    _check_size(D, args)
    if not D.is_cyclic():
        raise InputError("decompose needs a cyclic form")
    frob = D.signature % 2 == 0 and D.level <= 12
    comps = cyclic_decomposition(D, frobenius=frob)
    out = []
    ok = True
    for c in comps:
        item = {
            "M": c["M"],
            "characters": [[p, s] for p, s in zip(c["primes"], c["psi"])],
            "dimension": len(c["basis"]),
            "basis": [[fraction_str(x) for x in v] for v in c["basis"]],
        }
        if "character_norm" in c:
            item["character_norm"] = fraction_str(c["character_norm"])
            ok &= c["character_norm"] == 1
        out.append(item)
    _emit({"components": out, "total_dimension": sum(len(c["basis"]) for c in comps)}, args)
    return 0 if ok else 1


def cmd_selftest(args) -> int:
    """Relations, Milgram, integral bases and invariant cross-checks on the corpus."""
    syms = [s for s in corpus_symbols() if builtin(s).size <= args.max_order]
    failures = []
    t0 = time.time()
    for s in syms:
        D = builtin(s)
        checks = _form_checks(D, s)
        B = integral_basis(D)
        checks["integral_basis"] = verify_integrality(D, B).verdict
        if D.size > 1:
            checks["natural_basis_nonintegral"] = not verify_integrality(D, natural_basis(D), n_random=0).verdict
        if D.signature % 2 == 0 and D.level <= 12:
            rep = invariant_report(D, "all")
            checks["invariants_agree"] = rep.agreement and rep.rational
        bad = [k for k, v in checks.items() if not v]
        if bad:
            failures.append({"form": s, "failed": bad})
    _emit({"forms": len(syms), "failures": failures, "seconds": round(time.time() - t0, 1),
           "ok": not failures}, args)
    return 0 if not failures else 1


COMMANDS = {
    "build": cmd_build,
    "info": cmd_info,
    "rep": cmd_rep,
    "basis": cmd_basis,
    "verify": cmd_verify,
    "invariants": cmd_invariants,
    "decompose": cmd_decompose,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weil", description="Weil representations of discriminant forms")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().split("\n")[0] or None)
        p.add_argument("--symbol", "--form", dest="symbol", help="genus symbol, e.g. '2_1^+1 ⊕ 3^-1' or 'U(6)'")
        p.add_argument("--input", help="form JSON file (as written by 'build')")
        p.add_argument("--out", help="write the output here instead of stdout")
        p.add_argument("--max-order", type=int, default=256, help="bound on |D| for enumeration")
        p.add_argument("--pretty", action="store_true", help="plain text instead of JSON")
        if name == "rep":
            p.add_argument("--word", required=True, help="word in T, S, Z, e.g. 'S T^-1 S'")
        if name == "basis":
            p.add_argument("--verify", action="store_true", help="check integrality of the action")
        if name == "invariants":
            p.add_argument("--method", choices=["kernel", "frobenius", "formula", "all"], default="all")
            p.add_argument("--emit-basis", help="write the invariant basis to this JSON file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.max_order < 1:
        parser.error("--max-order must be positive")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"weil {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
