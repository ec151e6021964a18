"""Experiment orchestration as a LangGraph state machine."""
