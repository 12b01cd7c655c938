"""Elliptical-process regression."""
