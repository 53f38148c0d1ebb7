"""Toolkit for auditing the digitisation of preferential (STV) ballots.

Subsystems: preference data and commitments (:mod:`ballots`), transparent
seeded sampling (:mod:`sampling`), selection-probability planning
(:mod:`planning`), exact error-rate intervals (:mod:`stats`), STV
tabulation (:mod:`stv`) with apparent-margin bounds (:mod:`margins`), the
event-sourced audit session (:mod:`session`), and the CLI / HTTP service
(:mod:`cli`, :mod:`api`).
"""

__version__ = "0.1.0"
