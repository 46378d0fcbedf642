"""Query answering and loop analysis for existential rules."""
