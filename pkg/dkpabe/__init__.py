# __init__dkpabe.py

from dkpabe.access import AccessTree, AttributeId, parse_policy, format_policy, satisfies, select_satisfying
from dkpabe.encoding import KeyStoreDecoder, KeyStoreEntry, Role, decode, encode
from dkpabe.errors import CryptoError, DkpabeError, FormatError
from dkpabe.groups import Backend, GroupContext, OpCounts
from dkpabe.hybrid import hybrid_decrypt, hybrid_encrypt
from dkpabe.issuing import AuthorityIssuingSession, GrantTable, UserIssuingSession, create_pseudonym
from dkpabe.kpabe import (AuthorityPublicKey, AuthoritySecretKey, Ciphertext, GlobalParams, UserKeyShare,
                          authority_setup, decrypt, encrypt, global_setup, keygen)
from dkpabe.stream import Stream

__version__ = '1.0.0'
