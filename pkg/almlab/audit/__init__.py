from almlab.audit.logger import AuditLogger

__all__ = ["AuditLogger"]
