__version__ = "0.1.0"

# Disables flake8 errors for unused imports (project structuring)
# flake8: noqa: F401
from kondometry.exceptions import KondometryError
from kondometry.statuscodes import ERROR, RESOURCE_ERROR, SUCCESS
