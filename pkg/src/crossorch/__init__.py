"""LLM-agent orchestration across an optical network domain and a robotic domain."""

__version__ = "0.1.0"
