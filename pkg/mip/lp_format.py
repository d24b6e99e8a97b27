"""
mip/lp_format.py
Writer and reader for the CPLEX LP text format (the subset MilpModel needs).

Variables are written in declaration order and constraints in insertion
order, numbers with 12 significant digits. Objective constants go through a
ONE_VAR_CONSTANT column fixed to 1, as LP files cannot hold bare constants.
"""
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Tuple, Union

from env.errors import ModelError
from mip.model import MilpModel

logger = logging.getLogger(__name__)

ONE = "ONE_VAR_CONSTANT"
_INVALID = re.compile(r"[^A-Za-z0-9_.\[\]{}!\"#$%&()/,;?@`'|~]")
_SECTIONS = ("maximize", "subject to", "bounds", "general", "binary", "end")


def _num(value: float) -> str:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    text = f"{value:.12g}"
    return "0" if text == "-0" else text


def lp_names(model: MilpModel) -> List[str]:
    names, seen = [], set()
    for var in model.variables:
        name = _INVALID.sub("_", var.name)
        if not name or name[0].isdigit() or name[0] == ".":
            name = "v" + name
        if name in seen or name == ONE or name.lower() == "e":
            raise ModelError(f"name collision writing LP file: {var.name} -> {name}")
        seen.add(name)
        names.append(name)
    return names


def _terms(coeffs: Dict[int, float], names: List[str]) -> List[str]:
    out = []
    for var in sorted(coeffs):
        coef = coeffs[var]
        sign = "-" if coef < 0 else "+"
        out.append(f"{sign} {_num(abs(coef))} {names[var]}")
    return out


def export_lp(model: MilpModel) -> str:
    names = lp_names(model)
    lines = [f"\\* {model.name} *\\", "maximize"]

    obj_terms = _terms(model.objective, names)
    uses_one = model.objective_constant != 0.0 or not obj_terms
    if uses_one:
        obj_terms.append(f"{'-' if model.objective_constant < 0 else '+'} {_num(abs(model.objective_constant))} {ONE}")
    lines.append(" obj: " + " ".join(obj_terms))

    lines.append("subject to")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for con in model.constraints:
        row = _terms(con.coeffs, names)
        if not row:
            row = [f"+ 0 {ONE}"]
            uses_one = True
        lines.append(f" {_INVALID.sub('_', con.name)}: {' '.join(row)} {op[con.sense]} {_num(con.rhs)}")
    if uses_one:
        lines.append(f" c_e_{ONE}: + 1 {ONE} = 1")

    lines.append("bounds")
    for name, var in zip(names, model.variables):
        lines.append(f" {_num(var.lower)} <= {name} <= {_num(var.upper)}")
    if uses_one:
        lines.append(f" 1 <= {ONE} <= 1")

    generals = [n for n, v in zip(names, model.variables) if v.kind == "integer"]
    binaries = [n for n, v in zip(names, model.variables) if v.kind == "binary"]
    if generals:
        lines.append("general")
        lines.extend(f" {n}" for n in generals)
    if binaries:
        lines.append("binary")
        lines.extend(f" {n}" for n in binaries)
    lines.append("end")
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(export_lp(model))
    logger.debug(f"Wrote LP file {path} ({model.n_vars} variables, {model.n_constraints} rows)")
    return path


# -- reader ------------------------------------------------------------

def _parse_number(token: str) -> float:
    token = token.lower()
    if token in ("+inf", "inf", "+infinity", "infinity"):
        return math.inf
    if token in ("-inf", "-infinity"):
        return -math.inf
    return float(token)


def _parse_terms(text: str, line: int) -> Dict[str, float]:
    tokens = text.split()
    terms: Dict[str, float] = {}
    k = 0
    while k < len(tokens):
        sign = 1.0
        if tokens[k] in ("+", "-"):
            sign = -1.0 if tokens[k] == "-" else 1.0
            k += 1
        if k + 1 >= len(tokens):
            raise ModelError(f"LP line {line}: dangling term in '{text}'")
        coef = sign * _parse_number(tokens[k])
        name = tokens[k + 1]
        terms[name] = terms.get(name, 0.0) + coef
        k += 2
    return terms


def read_lp(text: str) -> MilpModel:
    """Parse text produced by export_lp back into a MilpModel."""
    section = None
    name = "model"
    objective: Dict[str, float] = {}
    rows: List[Tuple[str, Dict[str, float], str, float]] = []
    bounds: List[Tuple[str, float, float]] = []
    generals, binaries = set(), set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\*"):
            name = line.strip("\\* ").strip() or name
            continue
        if line.lower() in _SECTIONS:
            section = line.lower()
            if section == "end":
                break
            continue
        if section == "maximize":
            label, _, body = line.partition(":")
            objective = _parse_terms(body, lineno)
        elif section == "subject to":
            label, _, body = line.partition(":")
            match = re.match(r"^(.*?)(<=|>=|=)\s*(\S+)$", body.strip())
            if not match:
                raise ModelError(f"LP line {lineno}: cannot parse constraint '{line}'")
            rows.append((label.strip(), _parse_terms(match.group(1), lineno), match.group(2),
                         _parse_number(match.group(3))))
        elif section == "bounds":
            parts = line.split()
            if len(parts) != 5 or parts[1] != "<=" or parts[3] != "<=":
                raise ModelError(f"LP line {lineno}: cannot parse bound '{line}'")
            bounds.append((parts[2], _parse_number(parts[0]), _parse_number(parts[4])))
        elif section == "general":
            generals.add(line)
        elif section == "binary":
            binaries.add(line)
        else:
            raise ModelError(f"LP line {lineno}: content outside of a section")

    model = MilpModel(name=name)
    for var_name, lower, upper in bounds:
        if var_name == ONE:
            continue
        kind = "binary" if var_name in binaries else "integer" if var_name in generals else "continuous"
        model.add_var(var_name, kind, lower, upper)

    def resolve(terms: Dict[str, float]) -> Tuple[Dict[int, float], float]:
        coeffs, constant = {}, 0.0
        for var_name, coef in terms.items():
            if var_name == ONE:
                constant += coef
            else:
                coeffs[model.var(var_name)] = coef
        return coeffs, constant

    coeffs, constant = resolve(objective)
    model.add_objective(coeffs)
    model.objective_constant = constant
    for label, terms, sense, rhs in rows:
        if label == f"c_e_{ONE}":
            continue
        coeffs, constant = resolve(terms)
        model.add_constraint(coeffs, sense, rhs - constant, name=label)
    return model
