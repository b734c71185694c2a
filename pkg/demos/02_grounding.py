#!/usr/bin/env python3
# Ground a tiny tagging model against a committed atom universe. Only atoms
# that were committed participate, which is how the model is kept small.

from softlogic import AtomDatabase, GroundAtom, ground_program, parse_program

program = parse_program("""
@predicate Pcat/2
Pcat(T,C1) & C1 != C2 -> ~Pcat(T,C2) .
Pcat(T,+C) = 1 .
""").program

db = AtomDatabase()
db.register_program_predicates(program)
# the token 'weiß' is ambiguous between adjective and verb; commit only the
# two plausible readings, not the whole tagset
db.commit_atom(GroundAtom("Pcat", ("weiß", "ADJ")), 0.0, "open")
db.commit_atom(GroundAtom("Pcat", ("weiß", "VERB")), 0.0, "open")

model, report = ground_program(program, db)
print("groundings per rule:", report.rule_counts)
print("\nground model dump:")
print(model.dump())

print("\nback-references (atom -> ground rules touching it):")
for atom, gids in sorted(model.atom_rules.items(), key=lambda kv: str(kv[0])):
    print(f"  {atom}: {gids}")

print("\nadding a third reading enlarges the model quadratically:")
db.commit_atom(GroundAtom("Pcat", ("weiß", "NOUN")), 0.0, "open")
model, report = ground_program(program, db)
print("groundings per rule:", report.rule_counts)
