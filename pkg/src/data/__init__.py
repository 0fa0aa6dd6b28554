"""Synthetic scenes and the procedural style corpus"""
