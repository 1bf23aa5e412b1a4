"""Correction-recall experiment harness.

After a human correction is recorded, does the model re-propose the
corrected action when the same semantic state comes back n steps later?
Two deterministic mocks bracket the behavior: one with unlimited recall,
one that only sees the last five exchanges.  Live models can be scored
with the same harness via the CLI:

    nudgesim recall-exp --client live --endpoint URL --model NAME
"""

from nudgesim.cli import _recall_setup
from nudgesim.llm_clients import MockClient, RecallPolicy
from nudgesim.orchestrator import recall_experiment

setup = _recall_setup()
n_values = [0, 5, 10, 15]

for name, window in (("perfect recall", None), ("forgets after 5 exchanges", 5)):
    factory = lambda: MockClient(RecallPolicy(default="# Move ; beans &", window=window))
    results = recall_experiment(factory, setup, n_values, trials=20)
    print(f"{name}:")
    print("  n steps ago :", "  ".join(f"{r.n:4d}" for r in results))
    print("  success rate:", "  ".join(f"{r.rate:4.0%}" for r in results))
    print()
