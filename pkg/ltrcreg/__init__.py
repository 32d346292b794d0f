"""Relative error regression for curves with LTRC responses."""
