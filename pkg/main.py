"""
Cylinder Active Flow Control - Main Entry Point

Trains Soft Actor-Critic agents that drive two synthetic jets on a confined
cylinder to reduce drag and lift fluctuation, using a lattice-Boltzmann flow
solver and time-history features of sparse surface pressure sensors.
"""

import sys
import os

# Add the cylinder_afc package to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cylinder_afc.cli import main


if __name__ == "__main__":
    sys.exit(main())
