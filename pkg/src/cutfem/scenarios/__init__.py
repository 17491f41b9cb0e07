"""Scenario drivers built on the core library; each returns plain records for CSV output."""
