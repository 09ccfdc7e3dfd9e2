from atep.metrics.annecs import update_annecs
from atep.metrics.ledger import LEDGER_HEADER, LedgerRow, RunLedger, anr, fnr

__all__ = ["LEDGER_HEADER", "LedgerRow", "RunLedger", "anr", "fnr", "update_annecs"]
