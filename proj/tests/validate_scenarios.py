"""Validates every bundled scenario against the published JSON schema."""

import json
import pathlib
import sys

import jsonschema


def main(schema_path: str, scenario_dir: str) -> int:
    schema = json.loads(pathlib.Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    for path in sorted(pathlib.Path(scenario_dir).glob("*.json")):
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path.name}: $.{'.'.join(map(str, e.absolute_path))}: {e.message}")
        print(f"{'FAIL' if errors else 'ok  '} {path.name}")
        failures += bool(errors)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
