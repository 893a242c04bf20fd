"""Searchable symmetric encryption for fixed-schema record collections.

Clients hold a single 128-bit master key, attach a codeword-array index to
each encrypted record, and query the untrusted server with keyword trapdoors.
Server-side code (``gridseal.server`` and everything it imports) never touches
key material or plaintext; that boundary is enforced by module dependencies
and checked in the test suite.
"""

__version__ = "0.1.0"
