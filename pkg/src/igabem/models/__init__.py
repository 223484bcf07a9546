"""Shipped example models."""
