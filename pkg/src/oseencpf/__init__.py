"""Robin-controlled Oseen systems, coprime factorizations and their perturbations.

Submodules
----------
mesh         channel-with-obstacle triangulations and the mesh text format
fem          Taylor-Hood assembly of the weak Oseen operators
steady       stationary solves and families of linearization points
lti          descriptor and projected state-space systems
riccati      sign-function Riccati solver
hinf         H-infinity norm by level-set iteration
cpf          coprime factors and their perturbations
synth        normalized-coprime-factor robust controllers
experiments  the scaling and robustness drivers
cli          the ``oseencpf`` command
"""

__version__ = "0.1.0"
