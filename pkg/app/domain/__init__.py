"""Numerical core: space, fields, marks, configurations and expressions"""
