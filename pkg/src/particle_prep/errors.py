"""Exception hierarchy shared by all modules.

Each class maps to one CLI exit category (see cli.EXIT_CODES).
"""


class ParticlePrepError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ParticlePrepError):
    """Invalid or inconsistent configuration (exit code 2)."""


class MalformedInputError(ParticlePrepError):
    """Unparseable input file; message names the byte offset or line (exit code 3)."""


class EmptyInputError(ParticlePrepError):
    """Input parses but contains no geometry (exit code 4)."""


class TopologyError(ParticlePrepError):
    """Open loops, non-watertight meshes, degenerate surfaces (exit code 4)."""


class EmptyBandError(ParticlePrepError):
    """No core cell found: geometry lies entirely outside the domain (exit code 4)."""


class EmptySeedError(ParticlePrepError):
    """Lattice seeding produced zero particles (exit code 4)."""


class OutOfDomainError(ParticlePrepError):
    """A probe point lies outside the field's domain box."""


class DegenerateNormalError(ParticlePrepError):
    """Normal requested where no gradient information exists (far-field region)."""


class ParticleEscapeError(ParticlePrepError):
    """A particle left the domain box during relaxation; names the particle index."""
