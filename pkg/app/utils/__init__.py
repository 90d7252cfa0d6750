"""Numerical helpers"""
