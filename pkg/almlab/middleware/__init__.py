from almlab.middleware.logging import CommandLoggingMiddleware

__all__ = ["CommandLoggingMiddleware"]
