"""Smart-Ponzi detection from contract transaction histories.

Pipeline: ingest transaction logs (``chain_data``), compute per-contract
behavioural features (``features``), train tree ensembles (``trees``),
select hyper-parameters and features (``selection``), evaluate and compare
classifiers (``evaluation``) and explain predictions with exact TreeSHAP
(``explain``).
"""

__version__ = "0.1.0"
