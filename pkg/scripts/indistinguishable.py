#!/usr/bin/env python3
"""Print the moment table for two signals that an undisplaced reference cannot separate."""
from stokescov.bench import indistinguishability_demo

if __name__ == "__main__":
    print(indistinguishability_demo().render(), end="")
