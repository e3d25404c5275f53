"""Command line front-end.

Exit codes::

    0   ok
    1   channel is CP and trace non-increasing but not trace preserving
    2   invalid channel
    3   not invertible / criterion fails
    4   imperfect scheme
    5   perfect scheme but the entropy-bound audit errored
    64  parse error or bad arguments
    65  Q operator is not positive semi-definite
    66  a scheme key channel is not invertible

``--machine`` prints one JSON document on stdout; otherwise a short human
summary is printed. The default tolerance is 1e-9, overridable through the
``QCHAN_TOL`` environment variable or ``--tol``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import channel as ch
from . import encryption as enc
from . import invertibility as inv
from . import io
from .linalg import DEFAULT_TOL, hermitian_eig, min_eigenvalue

EXIT_OK = 0
EXIT_CP_ONLY = 1
EXIT_INVALID = 2
EXIT_NOT_INVERTIBLE = 3
EXIT_IMPERFECT = 4
EXIT_BOUND_ERROR = 5
EXIT_PARSE = 64
EXIT_BAD_Q = 65
EXIT_BAD_KEY = 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def default_tol() -> float:
    raw = os.environ.get("QCHAN_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        val = float(raw)
    except ValueError:
        raise UsageError(f"QCHAN_TOL={raw!r} is not a number") from None
    if not val > 0:
        raise UsageError("QCHAN_TOL must be positive")
    return val


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not val > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return val


def _seed(text: str) -> int:
    try:
        val = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _emit(args, report: dict[str, Any], human: list[str]) -> int:
    if args.machine:
        sys.stdout.write(io.dumps(report))
    else:
        for line in human:
            print(line)
    return report["exit_code"]


def _error(args, command: str, code: int, message: str, **extra) -> int:
    report = {"command": command, "exit_code": code, "error": message, **extra}
    if args.machine:
        sys.stdout.write(io.dumps(report))
    else:
        print(f"error: {message}", file=sys.stderr)
    return code


def _load_channel_or_fail(args, command: str, path: str):
    try:
        return io.load_channel(path), None
    except io.ParseError as exc:
        return None, _error(args, command, EXIT_PARSE, str(exc), location=exc.location)
    except io.InvalidChannelError as exc:
        return None, _error(args, command, EXIT_INVALID, str(exc))


def cmd_check(args) -> int:
    e, code = _load_channel_or_fail(args, "check", args.channel)
    if e is None:
        return code
    tol = args.tol
    tp, resid = ch.is_trace_preserving(e, tol)
    gram_top = float(hermitian_eig(ch.kraus_gram(e)).eigenvalues[0])
    choi_min = min_eigenvalue(ch.choi(e))
    cp = choi_min >= -tol * max(1.0, e.dim_in)
    if not cp or gram_top > 1.0 + tol * np.sqrt(e.dim_in):
        status, code = "invalid", EXIT_INVALID
    elif tp:
        status, code = "cptp", EXIT_OK
    else:
        status, code = "cp", EXIT_CP_ONLY
    report = {
        "command": "check",
        "file": Path(args.channel).name,
        "status": status,
        "exit_code": code,
        "dim_in": e.dim_in,
        "dim_out": e.dim_out,
        "num_kraus": len(e),
        "tp_residual": resid,
        "gram_max_eigenvalue": gram_top,
        "choi_min_eigenvalue": choi_min,
        "tol": tol,
    }
    human = [
        f"{Path(args.channel).name}: {status} ({e.dim_in} -> {e.dim_out}, {len(e)} Kraus)",
        f"  trace-preservation residual {resid:.3e}",
        f"  Choi min eigenvalue {choi_min:.3e}",
    ]
    return _emit(args, report, human)


def cmd_invert(args) -> int:
    e, code = _load_channel_or_fail(args, "invert", args.channel)
    if e is None:
        return code
    tol = args.tol
    rep = inv.pairwise_condition(e, tol)
    pairwise = {
        "holds": rep.holds,
        "worst_residual": rep.worst_residual,
        "worst_pair": list(rep.worst_pair) if rep.worst_pair is not None else None,
        "reason": rep.reason,
    }
    report: dict[str, Any] = {
        "command": "invert",
        "file": Path(args.channel).name,
        "invertible": False,
        "exit_code": EXIT_NOT_INVERTIBLE,
        "pairwise": pairwise,
        "form": None,
        "tol": tol,
    }
    if not rep.holds:
        i, j = rep.worst_pair
        human = [
            f"{Path(args.channel).name}: not invertible",
            f"  Kraus pair ({i}, {j}): residual {rep.worst_residual:.3e} ({rep.reason})",
        ]
        return _emit(args, report, human)
    try:
        form = inv.decompose(e, tol)
    except inv.DecompositionError as exc:
        report["error"] = str(exc)
        return _emit(args, report, [f"{Path(args.channel).name}: decomposition failed: {exc}"])
    inverse = inv.inverse_channel(form) if args.emit_inverse else None
    report["invertible"] = True
    report["exit_code"] = EXIT_OK
    report["form"] = {
        "p": form.p,
        "q": form.q,
        "ancilla_dim": form.ancilla_dim,
        "support_size": form.support_size,
        "gammas": form.gammas.tolist(),
        "omega_trace": float(np.real(np.trace(form.omega))),
        "reconstruction_error": form.reconstruction_error,
    }
    if inverse is not None:
        err = ch.choi_distance(ch.compose(inverse, e), ch.identity_channel(e.dim_in))
        report["inverse"] = {"num_kraus": len(inverse), "composition_error": err}
    if args.out:
        io.write_json(args.out, io.form_to_json(form, inverse))
        report["out"] = Path(args.out).name
    human = [
        f"{Path(args.channel).name}: invertible, ancilla dimension {form.ancilla_dim}",
        "  omega spectrum " + ", ".join(f"{g:.12g}" for g in form.gammas),
        f"  reconstruction error {form.reconstruction_error:.3e}",
    ]
    return _emit(args, report, human)


def cmd_criterion(args) -> int:
    e, code = _load_channel_or_fail(args, "criterion", args.channel)
    if e is None:
        return code
    tol = args.tol
    q_op = None
    source = "identity"
    derived_c = None
    try:
        if args.q_path:
            source = "file"
            q_op = io.load_matrix(args.q_path)
        elif args.inverse_path:
            source = "inverse"
            d = io.load_channel(args.inverse_path)
            try:
                q_op, derived_c = inv.q_from_inverse(e, d, tol)
            except inv.NotInvertibleError as exc:
                return _error(args, "criterion", EXIT_NOT_INVERTIBLE, str(exc))
            except ValueError as exc:
                return _error(args, "criterion", EXIT_INVALID, str(exc))
    except io.ParseError as exc:
        return _error(args, "criterion", EXIT_PARSE, str(exc), location=exc.location)
    except io.InvalidChannelError as exc:
        return _error(args, "criterion", EXIT_INVALID, str(exc))
    try:
        rep = inv.criterion_evaluate(e, q_op, tol)
    except inv.NotPsdError as exc:
        return _error(args, "criterion", EXIT_BAD_Q, str(exc))
    except ValueError as exc:
        return _error(args, "criterion", EXIT_PARSE, str(exc))
    code = EXIT_OK if rep.holds else EXIT_NOT_INVERTIBLE
    report = {
        "command": "criterion",
        "file": Path(args.channel).name,
        "q_source": source,
        "holds": rep.holds,
        "exit_code": code,
        "c": rep.c,
        "c_from_inverse": derived_c,
        "residual": rep.residual,
        "q_operator": io.matrix_to_json(rep.q_operator) if rep.q_operator is not None else None,
        "tol": tol,
    }
    if rep.holds:
        human = [f"{Path(args.channel).name}: criterion holds with c = {rep.c:.12g} (Q from {source})"]
    else:
        human = [f"{Path(args.channel).name}: criterion fails (relative residual {rep.residual:.3e})"]
    return _emit(args, report, human)


def cmd_audit_scheme(args) -> int:
    tol = args.tol
    try:
        s = io.load_scheme(args.scheme, tol)
    except io.ParseError as exc:
        return _error(args, "audit-scheme", EXIT_PARSE, str(exc), location=exc.location)
    except enc.InvalidKeyError as exc:
        return _error(args, "audit-scheme", EXIT_BAD_KEY, str(exc), key=exc.key)
    except (io.InvalidChannelError, ValueError) as exc:
        return _error(args, "audit-scheme", EXIT_PARSE, str(exc))

    audit = enc.verify_perfect(s, tol)
    report: dict[str, Any] = {
        "command": "audit-scheme",
        "file": Path(args.scheme).name,
        "is_perfect": audit.is_perfect,
        "exit_code": EXIT_OK,
        "num_keys": len(s.keys),
        "support_size": int(np.sum(s.probabilities > 0)),
        "dim_in": s.dim_in,
        "dim_out": s.dim_out,
        "max_offdiag_residual": audit.max_offdiag_residual,
        "max_diag_residual": audit.max_diag_residual,
        "sigma": io.matrix_to_json(audit.sigma),
        "key_entropy_bits": audit.key_entropy_bits,
        "entropy_bound_bits": audit.entropy_bound_bits,
        "bound_satisfied": None,
        "bound_error": None,
        "bell_rank": None,
        "entropy_chain": None,
        "classical_reduction": None,
        "tol": tol,
    }
    human = [
        f"{Path(args.scheme).name}: {'perfect' if audit.is_perfect else 'NOT perfect'} "
        f"({len(s.keys)} keys, {s.dim_in} -> {s.dim_out})",
        f"  max off-diagonal residual {audit.max_offdiag_residual:.3e}, "
        f"diagonal residual {audit.max_diag_residual:.3e}",
        f"  key entropy H(p) = {audit.key_entropy_bits:.12g} bits",
    ]
    if args.bell:
        img = enc.bell_image(s)
        report["bell_rank"] = img.rank
        human.append(f"  Bell image rank {img.rank}")
    if not audit.is_perfect:
        if args.reduce_classical:
            red = enc.reduce_to_classical(s, tol)
            report["classical_reduction"] = {
                "is_perfect": red.is_perfect,
                "max_pairwise_distance": red.max_pairwise_distance,
            }
        report["exit_code"] = EXIT_IMPERFECT
        return _emit(args, report, human)

    failures = []
    try:
        ka = enc.key_entropy_audit(s, tol)
        report["bound_satisfied"] = ka.satisfied
        report["entropy_bound_bits"] = ka.bound_bits
        if not ka.satisfied:
            failures.append(f"H(p) = {ka.entropy_bits:.12g} below bound {ka.bound_bits:g}")
        human.append(f"  bound 2n = {ka.bound_bits:g}: {'satisfied' if ka.satisfied else 'VIOLATED'}")
    except ValueError as exc:
        failures.append(str(exc))
    if args.entropy_chain:
        try:
            chain = enc.entropy_chain_audit(s, tol)
            report["entropy_chain"] = {
                "m": chain.m,
                "sigma_entropy": chain.sigma_entropy,
                "key_entropy": chain.key_entropy,
                "mean_ancilla_entropy": chain.mean_ancilla_entropy,
                "upper_bound": chain.upper_bound,
                "lower_bound": chain.lower_bound,
                "upper_holds": chain.upper_holds,
                "lower_holds": chain.lower_holds,
            }
            if not chain.holds:
                failures.append("entropy chain violated")
            human.append(
                f"  entropy chain: {chain.lower_bound:.9g} <= S(sigma) = {chain.sigma_entropy:.9g}"
                f" <= {chain.upper_bound:.9g}"
            )
        except ValueError as exc:
            failures.append(str(exc))
    if args.reduce_classical:
        red = enc.reduce_to_classical(s, tol)
        report["classical_reduction"] = {
            "is_perfect": red.is_perfect,
            "max_pairwise_distance": red.max_pairwise_distance,
        }
        human.append(
            f"  classical reduction: {'perfect' if red.is_perfect else 'NOT perfect'} "
            f"(spread {red.max_pairwise_distance:.3e})"
        )
        if not red.is_perfect:
            failures.append("classical reduction is not perfect")
    if failures:
        report["bound_error"] = "; ".join(failures)
        report["exit_code"] = EXIT_BOUND_ERROR
        human.append("  bound audit error: " + report["bound_error"])
    return _emit(args, report, human)


def _generate(args) -> dict:
    kind = args.kind
    if kind == "pauli-otp":
        if args.n is None:
            raise UsageError("pauli-otp needs --n")
        return io.scheme_to_json(enc.pauli_otp(args.n))
    if kind == "keyed-ancilla":
        if args.n is None:
            raise UsageError("keyed-ancilla needs --n")
        s = enc.keyed_ancilla_scheme(args.n, args.seed, ancilla_dim=args.ancilla or 2)
        return io.scheme_to_json(s)
    if kind == "depolarizing":
        if args.lam is None:
            raise UsageError("depolarizing needs --lambda")
        return io.channel_to_json(ch.depolarizing(args.lam))
    if kind == "random-invertible":
        if args.p is None or args.ancilla is None:
            raise UsageError("random-invertible needs --p and --ancilla")
        kraus = args.kraus if args.kraus is not None else args.ancilla + 1
        e, _, _ = ch.random_invertible(args.p, args.ancilla, kraus, args.seed, dim_out=args.dim_out)
        return io.channel_to_json(e)
    raise UsageError(f"unknown kind {kind!r}")


def cmd_gen(args) -> int:
    try:
        doc = _generate(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = io.dumps(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        report = {"command": "gen", "kind": args.kind, "exit_code": EXIT_OK, "out": Path(args.out).name}
        return _emit(args, report, [f"wrote {args.kind} to {args.out}"])
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=None, help="numerical tolerance")
    common.add_argument("--machine", action="store_true", help="print a JSON report")

    parser = _Parser(prog="qchan", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="validate a channel file")
    p.add_argument("channel")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("invert", parents=[common], help="decompose an invertible channel")
    p.add_argument("channel")
    p.add_argument("--emit-inverse", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("criterion", parents=[common], help="evaluate the Q-criterion")
    p.add_argument("channel")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--q-path")
    group.add_argument("--inverse-path")
    p.set_defaults(func=cmd_criterion)

    p = sub.add_parser("audit-scheme", parents=[common], help="audit an encryption scheme")
    p.add_argument("scheme")
    p.add_argument("--bell", action="store_true")
    p.add_argument("--reduce-classical", action="store_true")
    p.add_argument("--entropy-chain", action="store_true")
    p.set_defaults(func=cmd_audit_scheme)

    p = sub.add_parser("gen", parents=[common], help="generate channel or scheme files")
    p.add_argument("kind", choices=["pauli-otp", "keyed-ancilla", "depolarizing", "random-invertible"])
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--ancilla", type=int)
    p.add_argument("--kraus", type=int)
    p.add_argument("--dim-out", type=int)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.tol is None:
            args.tol = default_tol()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
