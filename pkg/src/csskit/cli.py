"""Operator entry point: validate, match, plan, serve, run and market commands.

Exit codes: 0 success, 1 domain negative (DISJOINT match, validation errors,
no feasible offer combination, step failure), 2 usage or parse error,
3 I/O or network error. Machine output goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import jsonio
from .documents import (
    SCHEMA_OFFER,
    SCHEMA_REQUEST,
    build_world,
    endpoints_from_doc,
    load_document_file,
    offer_from_doc,
    request_from_doc,
)
from .errors import (
    BindFailureError,
    ConnectionLostError,
    CssError,
    DocumentInvalidError,
    ExpressionSyntaxError,
    NoFeasibleCombinationError,
    OfferExpiredError,
    ParseError,
    StepFailedNoAlternativeError,
    TimeoutError,
    TypeMismatchError,
    UnitMismatchError,
    UnknownClassError,
    UnknownPropertyError,
)
from .expressions import format_feasible_set, parse_expression
from .hosting import build_resource_host
from .market import evaluate_offer, form_contract, select_offers
from .matching import MatchDegree, match_capabilities
from .model import validate_model
from .orchestrate import ExecuteOptions, execute_plan, plan, trace_to_lines
from .protocol import connect_tcp, serve
from .values import format_literal, format_timestamp, parse_timestamp

_USAGE_ERRORS = (
    DocumentInvalidError,
    ParseError,
    ExpressionSyntaxError,
    UnknownClassError,
    UnknownPropertyError,
    TypeMismatchError,
    UnitMismatchError,
)
_IO_ERRORS = (BindFailureError, ConnectionLostError, TimeoutError)


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2
    except _IO_ERRORS as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CssError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csskit",
        description="Capability matchmaking, skill execution and service tendering.",
    )
    sub = parser.add_subparsers(dest="command")

    p_validate = sub.add_parser("validate", help="validate model documents")
    p_validate.add_argument("files", nargs="+")
    p_validate.set_defaults(func=_cmd_validate)

    p_match = sub.add_parser("match", help="match a required against a provided capability")
    p_match.add_argument("--required", required=True)
    p_match.add_argument("--provided", required=True)
    p_match.add_argument("--world", required=True)
    p_match.add_argument("--format", choices=("text", "lines"), default="text")
    p_match.set_defaults(func=_cmd_match)

    p_plan = sub.add_parser("plan", help="plan a product against the world")
    p_plan.add_argument("--product", required=True)
    p_plan.add_argument("--world", required=True)
    p_plan.add_argument("--format", choices=("text", "lines"), default="text")
    p_plan.set_defaults(func=_cmd_plan)

    p_serve = sub.add_parser("serve", help="serve one resource's skills over TCP")
    p_serve.add_argument("--world", required=True)
    p_serve.add_argument("--resource", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.set_defaults(func=_cmd_serve)

    p_run = sub.add_parser("run", help="plan and execute a product over TCP endpoints")
    p_run.add_argument("--product", required=True)
    p_run.add_argument("--world", required=True)
    p_run.add_argument("--endpoints", required=True)
    p_run.add_argument("--out")
    p_run.add_argument("--no-feasibility", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_market = sub.add_parser("market", help="evaluate, select or accept offers")
    market_sub = p_market.add_subparsers(dest="market_command")
    for name, func in (
        ("eval", _cmd_market_eval),
        ("select", _cmd_market_select),
        ("accept", _cmd_market_accept),
    ):
        p = market_sub.add_parser(name)
        p.add_argument("--request", required=True)
        p.add_argument("--offers", nargs="+", required=True)
        p.add_argument("--world", required=True)
        p.add_argument("--now", required=True, help="ISO-8601 UTC timestamp")
        if name == "accept":
            p.add_argument("--out")
        p.set_defaults(func=func)

    return parser


def _load_world(*paths):
    return build_world([load_document_file(path) for path in paths])


def _cmd_validate(args) -> int:
    docs = [load_document_file(path) for path in args.files]
    world = build_world(docs)
    report = validate_model(world)
    for issue in report.issues:
        print(f"{issue.severity}: {issue.path}: {issue.message}")
    if report.ok:
        print(f"ok: {len(report.issues)} issue(s), none are errors", file=sys.stderr)
        return 0
    print(f"invalid: {len(report.errors())} error(s)", file=sys.stderr)
    return 1


def _cmd_match(args) -> int:
    world = _load_world(args.world)
    required = parse_expression(args.required, world)
    provided = parse_expression(args.provided, world)
    result = match_capabilities(required, provided, world)

    if args.format == "lines":
        print(
            jsonio.dumps(
                {
                    "degree": result.degree.value,
                    "witness": None
                    if result.witness is None
                    else {k: result.witness[k] for k in sorted(result.witness)},
                    "perProperty": {
                        property_id: {
                            "required": format_feasible_set(comparison.required),
                            "provided": format_feasible_set(comparison.provided),
                            "intersection": format_feasible_set(comparison.intersection),
                        }
                        for property_id, comparison in sorted(result.per_property.items())
                    },
                }
            )
        )
    else:
        print(f"degree: {result.degree.value}")
        if result.witness is not None:
            rendered = ", ".join(
                f"{k} = {format_literal(v)}" for k, v in sorted(result.witness.items())
            )
            print(f"witness: {rendered if rendered else '(unconstrained)'}")
        for property_id, comparison in sorted(result.per_property.items()):
            print(
                f"property {property_id}: "
                f"required={format_feasible_set(comparison.required)} "
                f"provided={format_feasible_set(comparison.provided)} "
                f"intersection={format_feasible_set(comparison.intersection)}"
            )
    return 1 if result.degree is MatchDegree.DISJOINT else 0


def _load_product(args, world):
    doc = load_document_file(args.product)
    from .documents import product_from_doc

    return product_from_doc(doc, world)


def _cmd_plan(args) -> int:
    world = _load_world(args.world)
    product = _load_product(args, world)
    production_plan = plan(product, world)
    for entry in production_plan.entries:
        if args.format == "lines":
            print(
                jsonio.dumps(
                    {
                        "stepId": entry.step_id,
                        "resourceId": entry.resource_id,
                        "capabilityId": entry.capability_id,
                        "skillId": entry.skill_id,
                        "degree": entry.match_degree.value,
                        "parameters": entry.parameter_assignment,
                    }
                )
            )
        else:
            rendered = ", ".join(
                f"{k}={format_literal(v)}"
                for k, v in sorted(entry.parameter_assignment.items())
            )
            print(
                f"{entry.step_id}: {entry.resource_id}/{entry.skill_id} "
                f"({entry.match_degree.value}) {rendered}"
            )
    return 0


def _cmd_serve(args) -> int:
    world = _load_world(args.world)
    report = validate_model(world)
    if not report.ok:
        for issue in report.errors():
            print(f"error: {issue.path}: {issue.message}", file=sys.stderr)
        return 1
    host = build_resource_host(world, args.resource)
    server = serve(host, ("127.0.0.1", args.port))
    print(
        f"serving resource {args.resource} on port {server.port} "
        f"({len(host.local_runtime_ids())} skill(s))",
        file=sys.stderr,
    )
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        return 0
    finally:
        server.close()


def _cmd_run(args) -> int:
    world = _load_world(args.world)
    product = _load_product(args, world)
    endpoints = endpoints_from_doc(load_document_file(args.endpoints))
    production_plan = plan(product, world)

    needed = {entry.resource_id for entry in production_plan.entries}
    for entry in production_plan.entries:
        needed.update(alt.resource_id for alt in entry.alternates)
    missing = sorted(r for r in needed if r not in endpoints)
    if missing:
        raise DocumentInvalidError(f"endpoints file misses resources {missing}")

    connections = {}
    try:
        for resource_id in sorted(needed):
            client = connect_tcp(endpoints[resource_id], client_name="csskit-run")
            client.hello()
            connections[resource_id] = client
        options = ExecuteOptions(use_feasibility=not args.no_feasibility)
        code = 0
        try:
            trace = execute_plan(production_plan, connections, options)
        except StepFailedNoAlternativeError as exc:
            trace = exc.trace
            print(f"error: {exc.message}", file=sys.stderr)
            code = 1
        lines = "\n".join(trace_to_lines(trace))
        if args.out:
            with open(args.out, "w", encoding="utf-8") as handle:
                handle.write(lines + "\n")
        else:
            print(lines)
        return code
    finally:
        for client in connections.values():
            client.close()


def _load_market_inputs(args):
    world = _load_world(args.world)
    request_doc = load_document_file(args.request)
    if request_doc.get("schema") != SCHEMA_REQUEST:
        raise DocumentInvalidError(
            f"{args.request}: expected schema {SCHEMA_REQUEST!r}"
        )
    request = request_from_doc(request_doc, world)
    offers = []
    for path in args.offers:
        doc = load_document_file(path)
        if doc.get("schema") != SCHEMA_OFFER:
            raise DocumentInvalidError(f"{path}: expected schema {SCHEMA_OFFER!r}")
        offers.append(offer_from_doc(doc, world))
    now = parse_timestamp(args.now)
    return world, request, offers, now


def _cmd_market_eval(args) -> int:
    world, request, offers, _ = _load_market_inputs(args)
    for offer in offers:
        admissibility = evaluate_offer(request, offer, world)
        print(
            jsonio.dumps(
                {
                    "offerId": offer.offer_id,
                    "admissible": admissibility.admissible,
                    "violations": [
                        {"criterion": v.criterion, "detail": v.detail}
                        for v in admissibility.violations
                    ],
                }
            )
        )
    return 0


def _cmd_market_select(args) -> int:
    world, request, offers, now = _load_market_inputs(args)
    try:
        award = select_offers(request, offers, now, world)
    except NoFeasibleCombinationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 1
    print(
        jsonio.dumps(
            {
                "requestId": award.request_id,
                "selectedOfferIds": list(award.offer_ids()),
                "totalCost": award.total_cost,
                "strategy": award.strategy,
                "quantityAllocation": award.quantity_allocation,
            }
        )
    )
    return 0


def _cmd_market_accept(args) -> int:
    world, request, offers, now = _load_market_inputs(args)
    try:
        award = select_offers(request, offers, now, world)
        contract = form_contract(award, accepted_at=now)
    except (NoFeasibleCombinationError, OfferExpiredError) as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 1
    rendered = jsonio.dumps(
        {
            "contractId": contract.contract_id,
            "requestId": contract.request_id,
            "acceptedOfferIds": list(contract.accepted_offer_ids),
            "totalPrice": contract.total_price,
            "formedAt": format_timestamp(contract.formed_at),
        }
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(rendered + "\n")
    else:
        print(rendered)
    return 0


if __name__ == "__main__":
    sys.exit(main())
