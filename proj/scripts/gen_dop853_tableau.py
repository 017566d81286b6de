#!/usr/bin/env python3
"""Emit include/cavity/dop853_tableau.hpp from scipy's DOP853 coefficient tables."""
import sys

import scipy.integrate._ivp.dop853_coefficients as c


def row(values):
    return "{" + ", ".join(repr(float(v)) for v in values) + "}"


def main(out):
    lines = [
        "// Generated by scripts/gen_dop853_tableau.py; do not edit.",
        "// Dormand-Prince 8(5,3) pair with the 7th-order dense-output extension",
        "// (Hairer, Norsett, Wanner, Solving ODEs I, Sec. II.10).",
        "#pragma once",
        "",
        "#include <array>",
        "",
        "namespace cavity::dop853 {",
        "",
        f"inline constexpr int kStages = {c.N_STAGES};",
        f"inline constexpr int kStagesExtended = {c.N_STAGES_EXTENDED};",
        f"inline constexpr int kInterpolatorPower = {c.INTERPOLATOR_POWER};",
        "",
        f"inline constexpr std::array<std::array<double, {c.N_STAGES_EXTENDED}>, {c.N_STAGES_EXTENDED}> A = {{{{",
    ]
    lines += ["    " + row(r) + "," for r in c.A]
    lines += ["}};", ""]
    lines.append(f"inline constexpr std::array<double, {len(c.B)}> B = {row(c.B)};")
    lines.append(f"inline constexpr std::array<double, {len(c.C)}> C = {row(c.C)};")
    lines.append(f"inline constexpr std::array<double, {len(c.E3)}> E3 = {row(c.E3)};")
    lines.append(f"inline constexpr std::array<double, {len(c.E5)}> E5 = {row(c.E5)};")
    lines.append("")
    lines.append(f"inline constexpr std::array<std::array<double, {c.D.shape[1]}>, {c.D.shape[0]}> D = {{{{")
    lines += ["    " + row(r) + "," for r in c.D]
    lines += ["}};", "", "}  // namespace cavity::dop853", ""]
    with open(out, "w") as fh:
        fh.write("\n".join(lines))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "include/cavity/dop853_tableau.hpp")
