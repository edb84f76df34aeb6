"""Quality-diversity co-design of morphology and control for tensegrity
soft modular robots.

Subpackages and modules:

* :mod:`tsmr_qd.morphology` - modular robot genomes and chain geometry
* :mod:`tsmr_qd.neuro` - NEAT controller genomes, speciation, reproduction
* :mod:`tsmr_qd.physics` - mass-spring simulator, tasks, fitness
* :mod:`tsmr_qd.qd` - grid archives, selection, heatmaps, persistence
* :mod:`tsmr_qd.autofd` - PCA-based automatic feature descriptors
* :mod:`tsmr_qd.evolvers` - ViE-NEAT, MAP-Elites and Double-Map MAP-Elites
* :mod:`tsmr_qd.bench` - experiment configuration, runner, analysis and CLI
"""
__version__ = "0.1.0"
