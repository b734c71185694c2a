#!/usr/bin/env python3
# Walk through the rule language: logical constraints, arithmetic rules with
# summation variables, filters, weighted rules, and canonical formatting.

from softlogic import format_rule, parse_program, parse_rule, validate_program

print("== a logical constraint (mutual exclusion of tags) ==")
rule, diags = parse_rule("Pcat(T,C1) & C1 != C2 -> ~Pcat(T,C2) .")
print("parsed body items:", rule.body.body)
print("clause form:", rule.body.clause())
print("canonical text:", format_rule(rule))

print("\n== an arithmetic constraint with a summation variable ==")
rule, _ = parse_rule("Pcat(T,+C)=1.")  # sloppy spacing is fine
print("canonical text:", format_rule(rule))
print("comparator:", rule.body.comparator, " rhs constant:", rule.body.rhs.constant)

print("\n== a filtered summation: helper atoms configure the grounding ==")
rule, _ = parse_rule("Pcat(T,C) = Pana(+PA,+TA) . {PA: Xcat(PA,T,C)}")
for flt in rule.body.filters:
    print(f"summation variable {flt.variable} is filtered by", flt.atoms)

print("\n== weighted rules carry a weight prefix instead of a dot ==")
rule, _ = parse_rule("2.0: Fvar('F1')")
print("weight:", rule.weight, " squared:", rule.squared)

print("\n== the validator reports problems as data, never by raising ==")
result = parse_program("A(X) -> B(Y) .\nA('one','two') .")
for diag in result.diagnostics + validate_program(result.program):
    print(" ", diag)
