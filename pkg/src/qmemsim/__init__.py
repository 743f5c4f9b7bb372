"""Semi-classical simulation of optical memory protocols in atomic ensembles.

Subpackages map onto the main functional areas:

- :mod:`qmemsim.numcore`: grids, pulses, transforms, transfer functions.
- :mod:`qmemsim.twolevel`: two-level Schrodinger-Maxwell solver.
- :mod:`qmemsim.threelevel`: perturbative Lambda-system solver.
- :mod:`qmemsim.echoprotocols`: 2PE / CRIB / ROSE sequencers and laws.
- :mod:`qmemsim.slowlight`: stopped-light protocol runners.
- :mod:`qmemsim.certify`: quantum-certification criteria and oracles.
- :mod:`qmemsim.cli`: scenario runner writing CSV/JSON artifacts.
"""

__version__ = "0.1.0"
