"""
This module defines the ParserService for reading and writing instance files.

Two formats are understood: the line-based cip text format and a free-format
MPS subset (NAME, OBJSENSE, ROWS, COLUMNS with integer markers, RHS, RANGES,
BOUNDS, ENDATA).
"""

import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..exceptions import ModelError, ParsingError
from ..models import IndicatorCons, LinRow, Problem, SignomialTerm

logger = logging.getLogger(__name__)

NAME = r"[A-Za-z_][\w.\[\]#$']*"
NUMBER = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"

term_pattern = re.compile(rf"\s*([+-])?\s*({NUMBER})?\s*\*?\s*({NAME})\s*")
name_prefix_pattern = re.compile(rf"^\s*({NAME})\s*:(.*)$")
operator_pattern = re.compile(r"(<=|>=|=<|=>|==|=|<|>)")
indicator_pattern = re.compile(rf"^IND\s+({NAME})\s*->\s*({NAME})\s*<=\s*0*(?:\.0*)?\s*$", re.IGNORECASE)
activation_pattern = re.compile(rf"^ACT\s+({NAME})\s*>=\s*(\S+)\s*$", re.IGNORECASE)
signomial_pattern = re.compile(rf"^SIG\s+({NAME})\s*(>=|<=|=)\s*(.+)$", re.IGNORECASE)
factor_pattern = re.compile(rf"^\s*({NAME})\s*(?:\^\s*([+-]?{NUMBER}))?\s*$")
section_pattern = re.compile(r"^[A-Z][A-Z .]*$")

CIP_SECTIONS = {
    "NAME": "name",
    "MINIMIZE": "min",
    "MINIMISE": "min",
    "MIN": "min",
    "MAXIMIZE": "max",
    "MAXIMISE": "max",
    "MAX": "max",
    "SUBJECT TO": "rows",
    "SUCH THAT": "rows",
    "ST": "rows",
    "S.T.": "rows",
    "BOUNDS": "bounds",
    "GENERAL": "general",
    "GENERALS": "general",
    "INTEGER": "general",
    "BINARY": "binary",
    "BINARIES": "binary",
    "END": "end",
}

MPS_SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")


def _normalize_operator(op: str) -> str:
    return {"=<": "<=", "<": "<=", "=>": ">=", ">": ">=", "==": "="}.get(op, op)


def _parse_number(token: str, line_no: Optional[int] = None) -> float:
    text = token.strip().lower()
    if text in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if text in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(text)
    except ValueError:
        raise ParsingError(f"Expected a number, got '{token.strip()}'.", line_no) from None


def _format_number(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


class _ProblemBuilder:
    """Collects variables, rows and markers while a file is read."""

    def __init__(self, name: str):
        self.name = name
        self.index: Dict[str, int] = {}
        self.names: List[str] = []
        self.objective: Dict[int, float] = {}
        self.rows: List[LinRow] = []
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.integers: set = set()
        self.binaries: set = set()
        self.maximize = False
        self.indicators: List[dict] = []
        self.signomials: List[dict] = []

    def var(self, name: str) -> int:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
            self.lower.append(0.0)
            self.upper.append(math.inf)
        return self.index[name]

    def add_row(self, coeffs: Dict[int, float], lhs: float, rhs: float, name: str, line_no: Optional[int]):
        try:
            self.rows.append(LinRow.from_mapping(coeffs, lhs, rhs, name or f"r{len(self.rows)}"))
        except ModelError as e:
            raise ParsingError(str(e), line_no) from e

    def build(self) -> Problem:
        for j in self.binaries:
            self.lower[j] = max(self.lower[j], 0.0)
            self.upper[j] = min(self.upper[j], 1.0)
        ints = self.integers | self.binaries

        indicators = []
        for entry in self.indicators:
            z, x = entry["binvar"], entry["var"]
            if entry["activation"] is None:
                raise ParsingError(f"Indicator on '{self.names[x]}' has no ACT line.", entry["line_no"])
            if z not in ints or self.lower[z] < 0 or self.upper[z] > 1:
                raise ParsingError(f"Indicator variable '{self.names[z]}' is not binary.", entry["line_no"])
            indicators.append(IndicatorCons(z, x, entry["activation"], entry["name"]))

        signomials = []
        for entry in self.signomials:
            idx = tuple(entry["vars"])
            t = entry["aux"]
            signomials.append(
                SignomialTerm(
                    exponents=tuple(entry["exponents"]),
                    var_indices=idx,
                    aux=t,
                    lower=tuple(self.lower[j] for j in idx),
                    upper=tuple(self.upper[j] for j in idx),
                    sense=entry["sense"],
                    aux_lower=self.lower[t] if self.lower[t] > 0 else None,
                    aux_upper=self.upper[t] if math.isfinite(self.upper[t]) else None,
                    name=entry["name"],
                )
            )

        n = len(self.names)
        sign = -1.0 if self.maximize else 1.0
        objective = [sign * self.objective.get(j, 0.0) for j in range(n)]
        try:
            return Problem.create(
                objective=objective,
                rows=self.rows,
                lower=self.lower,
                upper=self.upper,
                integer_set=ints,
                indicators=indicators,
                signomials=signomials,
                var_names=self.names,
                name=self.name,
                sense_flipped=self.maximize,
            )
        except ModelError as e:
            raise ParsingError(str(e)) from e


class ParserService:
    """Reads cip and MPS instance files into validated Problem objects."""

    def parse_problem(self, path: str, fmt: Optional[str] = None) -> Problem:
        """
        Reads an instance file.

        Args:
            path: Path to the instance file.
            fmt: "cip" or "mps"; derived from the file suffix when omitted.

        Returns:
            The validated Problem, normalized to minimization.

        Raises:
            ParsingError: If the file is missing or violates the grammar.
        """
        file_path = Path(path)
        if fmt is None:
            fmt = "mps" if file_path.suffix.lower() == ".mps" else "cip"
        try:
            text = file_path.read_text(encoding="utf-8")
        except OSError as e:
            raise ParsingError(f"Cannot read instance file {path}: {e}") from e
        problem = self.parse_text(text, fmt, name=file_path.stem)
        logger.info(
            f"Parsed {file_path.name}: {problem.num_vars} variables, {len(problem.rows)} rows, "
            f"{len(problem.integer_set)} integer, {len(problem.indicators)} indicators."
        )
        return problem

    def parse_text(self, text: str, fmt: str = "cip", name: str = "") -> Problem:
        if fmt == "cip":
            return self._parse_cip(text.splitlines(), name)
        if fmt == "mps":
            return self._parse_mps(text.splitlines(), name)
        raise ParsingError(f"Unknown instance format '{fmt}'.")

    # --- cip ---

    def _parse_cip(self, lines: List[str], name: str) -> Problem:
        builder = _ProblemBuilder(name)
        section: Optional[str] = None
        seen_end = False

        for line_no, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if seen_end:
                raise ParsingError("Content after END.", line_no)

            keyword = " ".join(line.upper().split())
            if keyword in CIP_SECTIONS or keyword.startswith("NAME "):
                kind = "name" if keyword.startswith("NAME") else CIP_SECTIONS[keyword]
                if kind == "name":
                    builder.name = line[4:].strip() or builder.name
                    continue
                if kind in ("min", "max"):
                    builder.maximize = kind == "max"
                    kind = "objective"
                if kind == "end":
                    seen_end = True
                section = kind
                continue

            looks_like_section = section_pattern.match(line) and not keyword.endswith(" FREE")
            if section is None or (section in ("objective", "rows", "bounds") and looks_like_section):
                raise ParsingError(f"Unknown section '{line}'.", line_no)

            if section == "objective":
                self._parse_objective_line(builder, line, line_no)
            elif section == "rows":
                self._parse_row_line(builder, line, line_no)
            elif section == "bounds":
                self._parse_bound_line(builder, line, line_no)
            elif section in ("general", "binary"):
                target = builder.integers if section == "general" else builder.binaries
                for token in line.split():
                    if not re.fullmatch(NAME, token):
                        raise ParsingError(f"Invalid variable name '{token}'.", line_no)
                    target.add(builder.var(token))

        if not seen_end:
            logger.debug("cip input ended without END marker.")
        return builder.build()

    def _parse_expression(self, builder: _ProblemBuilder, text: str, line_no: int) -> Dict[int, float]:
        coeffs: Dict[int, float] = {}
        pos = 0
        text = text.strip()
        first = True
        while pos < len(text):
            match = term_pattern.match(text, pos)
            if not match or match.end() == pos:
                raise ParsingError(f"Cannot parse expression near '{text[pos:]}'.", line_no)
            sign, number, var_name = match.groups()
            if sign is None and not first:
                raise ParsingError(f"Missing operator before '{var_name}'.", line_no)
            value = float(number) if number else 1.0
            if sign == "-":
                value = -value
            j = builder.var(var_name)
            coeffs[j] = coeffs.get(j, 0.0) + value
            pos = match.end()
            first = False
        return coeffs

    def _parse_objective_line(self, builder: _ProblemBuilder, line: str, line_no: int):
        match = name_prefix_pattern.match(line)
        body = match.group(2) if match else line
        for j, a in self._parse_expression(builder, body, line_no).items():
            builder.objective[j] = builder.objective.get(j, 0.0) + a

    def _parse_row_line(self, builder: _ProblemBuilder, line: str, line_no: int):
        row_name = ""
        match = name_prefix_pattern.match(line)
        if match:
            row_name, line = match.group(1), match.group(2).strip()

        head = line.split(None, 1)[0].upper() if line else ""
        if head == "IND":
            self._parse_indicator(builder, line, row_name, line_no)
            return
        if head == "ACT":
            self._parse_activation(builder, line, line_no)
            return
        if head == "SIG":
            self._parse_signomial(builder, line, row_name, line_no)
            return

        parts = [p.strip() for p in operator_pattern.split(line)]
        if len(parts) == 3:
            expr, op, side = parts
            coeffs = self._parse_expression(builder, expr, line_no)
            value = _parse_number(side, line_no)
            op = _normalize_operator(op)
            lhs, rhs = {"<=": (-math.inf, value), ">=": (value, math.inf), "=": (value, value)}[op]
        elif len(parts) == 5 and _normalize_operator(parts[1]) == "<=" and _normalize_operator(parts[3]) == "<=":
            lhs = _parse_number(parts[0], line_no)
            coeffs = self._parse_expression(builder, parts[2], line_no)
            rhs = _parse_number(parts[4], line_no)
        else:
            raise ParsingError(f"Malformed constraint '{line}'.", line_no)
        builder.add_row(coeffs, lhs, rhs, row_name, line_no)

    def _parse_indicator(self, builder: _ProblemBuilder, line: str, row_name: str, line_no: int):
        match = indicator_pattern.match(line)
        if not match:
            raise ParsingError(f"Malformed indicator '{line}', expected 'IND z -> x <= 0'.", line_no)
        z, x = builder.var(match.group(1)), builder.var(match.group(2))
        builder.indicators.append(
            {
                "binvar": z,
                "var": x,
                "activation": None,
                "name": row_name or f"ind{len(builder.indicators)}",
                "line_no": line_no,
            }
        )

    def _parse_activation(self, builder: _ProblemBuilder, line: str, line_no: int):
        match = activation_pattern.match(line)
        if not match:
            raise ParsingError(f"Malformed activation '{line}', expected 'ACT x >= L'.", line_no)
        x_name = match.group(1)
        value = _parse_number(match.group(2), line_no)
        if not (value > 0 and math.isfinite(value)):
            raise ParsingError(f"Activation bound of '{x_name}' must be positive and finite.", line_no)
        pending = [
            e for e in builder.indicators if e["activation"] is None and builder.names[e["var"]] == x_name
        ]
        if not pending:
            raise ParsingError(f"ACT line for '{x_name}' without a preceding IND line.", line_no)
        entry = pending[-1]
        entry["activation"] = value
        builder.add_row({entry["binvar"]: value, entry["var"]: -1.0}, -math.inf, 0.0, f"{entry['name']}_act", line_no)

    def _parse_signomial(self, builder: _ProblemBuilder, line: str, row_name: str, line_no: int):
        match = signomial_pattern.match(line)
        if not match:
            raise ParsingError(f"Malformed signomial '{line}'.", line_no)
        aux_name, op, body = match.groups()
        aux = builder.var(aux_name)
        variables, exponents = [], []
        for factor in body.split("*"):
            fmatch = factor_pattern.match(factor)
            if not fmatch:
                raise ParsingError(f"Malformed signomial factor '{factor.strip()}'.", line_no)
            exponent = float(fmatch.group(2)) if fmatch.group(2) else 1.0
            j = builder.var(fmatch.group(1))
            if j == aux:
                raise ParsingError("Signomial variable cannot appear in its own product.", line_no)
            if exponent == 0.0:
                raise ParsingError(f"Zero exponent on '{fmatch.group(1)}'.", line_no)
            if j in variables:
                raise ParsingError(f"Variable '{fmatch.group(1)}' repeated in signomial.", line_no)
            variables.append(j)
            exponents.append(exponent)
        sense = {"=": "eq", ">=": "ge", "<=": "le"}[op]
        builder.signomials.append(
            {
                "aux": aux,
                "vars": variables,
                "exponents": exponents,
                "sense": sense,
                "name": row_name or f"sig{len(builder.signomials)}",
            }
        )

    def _parse_bound_line(self, builder: _ProblemBuilder, line: str, line_no: int):
        tokens = line.split()
        if len(tokens) == 2 and tokens[1].lower() == "free":
            j = builder.var(tokens[0])
            builder.lower[j], builder.upper[j] = -math.inf, math.inf
            return

        parts = [p.strip() for p in operator_pattern.split(line)]
        if len(parts) == 5:
            if not (_normalize_operator(parts[1]) == "<=" and _normalize_operator(parts[3]) == "<="):
                raise ParsingError(f"Malformed bound '{line}'.", line_no)
            j = self._bound_var(builder, parts[2], line_no)
            builder.lower[j] = _parse_number(parts[0], line_no)
            builder.upper[j] = _parse_number(parts[4], line_no)
            return
        if len(parts) != 3:
            raise ParsingError(f"Malformed bound '{line}'.", line_no)

        left, op, right = parts[0], _normalize_operator(parts[1]), parts[2]
        if re.fullmatch(NAME, left) and left.lower() not in ("inf", "infinity"):
            j, value = builder.var(left), _parse_number(right, line_no)
        else:
            j, value = self._bound_var(builder, right, line_no), _parse_number(left, line_no)
            op = {"<=": ">=", ">=": "<=", "=": "="}[op]
        if op in ("<=", "="):
            builder.upper[j] = value
        if op in (">=", "="):
            builder.lower[j] = value

    def _bound_var(self, builder: _ProblemBuilder, token: str, line_no: int) -> int:
        if not re.fullmatch(NAME, token):
            raise ParsingError(f"Expected a variable name, got '{token}'.", line_no)
        return builder.var(token)

    # --- MPS ---

    def _parse_mps(self, lines: List[str], name: str) -> Problem:
        builder = _ProblemBuilder(name)
        section: Optional[str] = None
        objective_row: Optional[str] = None
        row_kind: Dict[str, str] = {}
        row_coeffs: Dict[str, Dict[int, float]] = {}
        row_order: List[str] = []
        rhs: Dict[str, float] = {}
        ranges: Dict[str, float] = {}
        integer_block = False

        for line_no, raw in enumerate(lines, start=1):
            if not raw.strip() or raw.lstrip().startswith("*"):
                continue
            tokens = raw.split()
            if not raw[0].isspace():
                head = tokens[0].upper()
                if head not in MPS_SECTIONS:
                    raise ParsingError(f"Unknown section '{tokens[0]}'.", line_no)
                section = head
                if head == "NAME" and len(tokens) > 1:
                    builder.name = tokens[1]
                if head == "OBJSENSE" and len(tokens) > 1:
                    builder.maximize = tokens[1].upper() in ("MAX", "MAXIMIZE")
                if head == "ENDATA":
                    break
                continue

            if section == "OBJSENSE":
                builder.maximize = tokens[0].upper() in ("MAX", "MAXIMIZE")
            elif section == "ROWS":
                if len(tokens) != 2 or tokens[0].upper() not in ("N", "L", "G", "E"):
                    raise ParsingError(f"Malformed ROWS entry '{raw.strip()}'.", line_no)
                kind, row = tokens[0].upper(), tokens[1]
                if kind == "N":
                    if objective_row is None:
                        objective_row = row
                    row_kind[row] = "N"
                    continue
                row_kind[row] = kind
                row_coeffs[row] = {}
                row_order.append(row)
            elif section == "COLUMNS":
                if len(tokens) >= 3 and tokens[1].strip("'").upper() == "MARKER":
                    marker = tokens[2].strip("'").upper()
                    if marker == "INTORG":
                        integer_block = True
                    elif marker == "INTEND":
                        integer_block = False
                    else:
                        raise ParsingError(f"Unknown marker '{tokens[2]}'.", line_no)
                    continue
                if len(tokens) not in (3, 5):
                    raise ParsingError(f"Malformed COLUMNS entry '{raw.strip()}'.", line_no)
                j = builder.var(tokens[0])
                if integer_block:
                    builder.integers.add(j)
                for row, value in zip(tokens[1::2], tokens[2::2]):
                    self._add_mps_coefficient(builder, row_kind, row_coeffs, objective_row, row, j, value, line_no)
            elif section in ("RHS", "RANGES"):
                pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
                target = rhs if section == "RHS" else ranges
                for row, value in zip(pairs[0::2], pairs[1::2]):
                    if row not in row_kind:
                        raise ParsingError(f"Unknown row '{row}' in {section}.", line_no)
                    if row_kind[row] == "N":
                        continue
                    target[row] = _parse_number(value, line_no)
            elif section == "BOUNDS":
                self._parse_mps_bound(builder, tokens, line_no)
            else:
                raise ParsingError(f"Data line outside of a section: '{raw.strip()}'.", line_no)

        for row in row_order:
            value = rhs.get(row, 0.0)
            kind = row_kind[row]
            lhs, rhs_side = {"L": (-math.inf, value), "G": (value, math.inf), "E": (value, value)}[kind]
            if row in ranges:
                r = ranges[row]
                if kind == "L":
                    lhs = value - abs(r)
                elif kind == "G":
                    rhs_side = value + abs(r)
                elif r >= 0:
                    rhs_side = value + r
                else:
                    lhs = value + r
            builder.add_row(row_coeffs[row], lhs, rhs_side, row, None)
        return builder.build()

    def _add_mps_coefficient(self, builder, row_kind, row_coeffs, objective_row, row, j, value, line_no):
        if row not in row_kind:
            raise ParsingError(f"Unknown row '{row}' in COLUMNS.", line_no)
        coefficient = _parse_number(value, line_no)
        if row == objective_row:
            builder.objective[j] = builder.objective.get(j, 0.0) + coefficient
        elif row_kind[row] != "N":
            row_coeffs[row][j] = row_coeffs[row].get(j, 0.0) + coefficient

    def _parse_mps_bound(self, builder: _ProblemBuilder, tokens: List[str], line_no: int):
        kind = tokens[0].upper()
        value: Optional[float] = None
        if kind in ("FR", "MI", "PL", "BV"):
            if len(tokens) not in (2, 3, 4):
                raise ParsingError(f"Malformed BOUNDS entry '{' '.join(tokens)}'.", line_no)
            column = tokens[2] if len(tokens) == 4 else tokens[-1]
            if len(tokens) == 3 and self._is_number(tokens[2]):
                column = tokens[1]
        else:
            if len(tokens) == 4:
                column, value = tokens[2], _parse_number(tokens[3], line_no)
            elif len(tokens) == 3:
                column, value = tokens[1], _parse_number(tokens[2], line_no)
            else:
                raise ParsingError(f"Malformed BOUNDS entry '{' '.join(tokens)}'.", line_no)

        j = builder.var(column)
        if kind == "UP":
            if value < 0 and builder.lower[j] == 0.0:
                logger.warning(f"Negative UP bound on '{column}' with zero lower bound; lower bound set to -inf.")
                builder.lower[j] = -math.inf
            builder.upper[j] = value
        elif kind == "LO":
            builder.lower[j] = value
        elif kind == "FX":
            builder.lower[j] = builder.upper[j] = value
        elif kind == "FR":
            builder.lower[j], builder.upper[j] = -math.inf, math.inf
        elif kind == "MI":
            builder.lower[j] = -math.inf
        elif kind == "PL":
            builder.upper[j] = math.inf
        elif kind == "BV":
            builder.binaries.add(j)
            builder.lower[j], builder.upper[j] = 0.0, 1.0
        elif kind == "LI":
            builder.integers.add(j)
            builder.lower[j] = value
        elif kind == "UI":
            builder.integers.add(j)
            builder.upper[j] = value
        else:
            raise ParsingError(f"Unknown bound type '{tokens[0]}'.", line_no)

    @staticmethod
    def _is_number(token: str) -> bool:
        try:
            float(token)
            return True
        except ValueError:
            return False

    # --- writing ---

    def format_cip(self, problem: Problem) -> str:
        """Renders a problem in cip format; the original objective sense is restored."""
        names = [problem.var_label(j) for j in range(problem.num_vars)]
        sign = -1.0 if problem.sense_flipped else 1.0
        out = [f"NAME {problem.name}"] if problem.name else []
        out.append("MAXIMIZE" if problem.sense_flipped else "MINIMIZE")
        objective = {j: sign * c for j, c in enumerate(problem.objective) if c != 0.0}
        out.append(f"  obj: {self._format_expression(objective, names)}" if objective else "")

        out.append("SUBJECT TO")
        companions = {
            ((ind.binvar, ind.activation), (ind.var, -1.0)) if ind.binvar < ind.var
            else ((ind.var, -1.0), (ind.binvar, ind.activation))
            for ind in problem.indicators
        }
        for row in problem.rows:
            if math.isinf(row.lhs) and row.rhs == 0.0 and tuple(row.coeffs) in companions:
                continue
            expr = self._format_expression(dict(row.coeffs), names)
            prefix = f"  {row.name}: " if row.name else "  "
            if row.lhs == row.rhs:
                out.append(f"{prefix}{expr} = {_format_number(row.rhs)}")
            elif math.isinf(row.lhs):
                out.append(f"{prefix}{expr} <= {_format_number(row.rhs)}")
            elif math.isinf(row.rhs):
                out.append(f"{prefix}{expr} >= {_format_number(row.lhs)}")
            else:
                out.append(f"{prefix}{_format_number(row.lhs)} <= {expr} <= {_format_number(row.rhs)}")
        for ind in problem.indicators:
            prefix = f"  {ind.name}: " if ind.name else "  "
            out.append(f"{prefix}IND {names[ind.binvar]} -> {names[ind.var]} <= 0")
            out.append(f"  ACT {names[ind.var]} >= {_format_number(ind.activation)}")
        for sig in problem.signomials:
            op = {"eq": "=", "ge": ">=", "le": "<="}[sig.sense]
            factors = " * ".join(f"{names[j]}^{_format_number(a)}" for j, a in zip(sig.var_indices, sig.exponents))
            out.append(f"  SIG {names[sig.aux]} {op} {factors}")

        out.append("BOUNDS")
        for j in range(problem.num_vars):
            lo, up = problem.lower[j], problem.upper[j]
            if math.isinf(lo) and math.isinf(up):
                out.append(f"  {names[j]} free")
            elif (lo, up) != (0.0, math.inf):
                out.append(f"  {_format_number(lo)} <= {names[j]} <= {_format_number(up)}")
        if problem.integer_set:
            out.append("GENERAL")
            out.append("  " + " ".join(names[j] for j in sorted(problem.integer_set)))
        out.append("END")
        return "\n".join(out) + "\n"

    def write_cip(self, problem: Problem, path: str) -> None:
        Path(path).write_text(self.format_cip(problem), encoding="utf-8")
        logger.info(f"Wrote {problem.num_vars} variables and {len(problem.rows)} rows to {path}.")

    @staticmethod
    def _format_expression(coeffs: Dict[int, float], names: List[str]) -> str:
        parts: List[str] = []
        for j in sorted(coeffs):
            a = coeffs[j]
            sign = "-" if a < 0 else "+"
            magnitude = _format_number(abs(a))
            term = names[j] if magnitude == "1" else f"{magnitude} {names[j]}"
            if not parts:
                parts.append(f"-{term}" if sign == "-" else term)
            else:
                parts.append(f"{sign} {term}")
        return " ".join(parts)
