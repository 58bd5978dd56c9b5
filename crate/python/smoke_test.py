"""Smoke test for the hinsearch extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml --release`.
"""

import json
import sys
import tempfile
from pathlib import Path

import hinsearch


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "planted"
        planted = hinsearch.write_planted_dataset(str(data), seed=0)
        schema = hinsearch.Schema.load(str(data / "schema.json"))
        assert schema.node_types == ["U", "B", "A", "I"], schema.node_types

        sentence = planted.sentence(schema)
        assert sentence.count(" AND ") == 1, sentence
        print("planted:", sentence)

        # relabelled copy has the same key
        twin = hinsearch.MetaStructure([0, 2, 3, 1], [(0, 2, 9), (2, 3, 5), (0, 1, 7), (1, 3, 3)], 0, 3)
        assert twin.canonical_key() == planted.canonical_key()

        rates = hinsearch.MetaStructure([0, 1], [(0, 1, 0)], 0, 1)
        assert rates.sentence(schema) == "User rates Business"
        ops = {op for op, _, _ in rates.neighbors(schema)}
        assert "insertion" in ops and "deletion" not in ops, ops
        assert len(rates.neighbors(schema, cap=2, seed=1)) == 2

        cyclic = hinsearch.MetaStructure([0, 0, 1], [(0, 1, 6), (1, 0, 6), (1, 2, 0)], 0, 2)
        assert any("cycle" in v for v in cyclic.violations(schema))

        task = hinsearch.Task.recommendation(str(data), "rates", str(data / "ratings.tsv"))
        assert task.metric == "AUC"
        assert task.evaluate(planted) == 1.0
        assert task.evaluate(planted, split="test") == 1.0

        result = task.search(generations=5, seed=0, explain_top_k=1)
        assert result.best_fitness >= 0.95, result.best_fitness
        assert result.best.canonical_key() == planted.canonical_key()
        assert len(result.curve) == 6
        parsed = json.loads(result.to_json())
        assert parsed["evaluator_calls"] == result.evaluator_calls
        result.write(str(Path(tmp) / "out"))
        assert (Path(tmp) / "out" / "curve.csv").exists()
        print("search best:", result.best_sentence, result.best_fitness, result.test_value)

    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
