"""Agent service that turns analytics queries into structured workflows.

Accepted query-workflow pairs accumulate in a shared example store that
feeds in-context retrieval; the store distills into a structured backend
API specification.
"""

__version__ = "0.1.0"
