"""Pipeline nodes, one stage per module."""
