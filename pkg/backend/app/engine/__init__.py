from .checks import CheckEngine, CheckReport, CheckResult, InvariantCheck

__all__ = ['CheckEngine', 'CheckReport', 'CheckResult', 'InvariantCheck']
