'''errors.py: Contains the exception hierarchy raised across the package.'''


class DkpabeError(Exception):
    '''Base class of every error raised by dkpabe.'''


class UnsupportedParameters(DkpabeError):
    '''A backend or parameter set that this build cannot provide.'''


class PolicySyntaxError(DkpabeError, ValueError):
    '''A textual policy that cannot be parsed.'''


class CryptoError(DkpabeError):
    '''A cryptographic operation or verification failed.'''


class BackendMismatch(CryptoError):
    pass


class DuplicatePoints(CryptoError, ValueError):
    pass


class Unsatisfied(CryptoError):
    '''The attribute set does not satisfy the access tree.'''


class PolicyUnsatisfied(Unsatisfied):
    def __init__(self, authority_id):
        super().__init__(f"Key share of authority {authority_id} does not satisfy the ciphertext attributes")
        self.authority_id = authority_id


class MissingShare(CryptoError):
    def __init__(self, authority_id):
        super().__init__(f"No key share for authority {authority_id}")
        self.authority_id = authority_id


class MissingLeafKey(CryptoError):
    pass


class ForeignLeaf(CryptoError):
    pass


class DegenerateUid(CryptoError):
    pass


class UnknownAttribute(CryptoError):
    pass


class EmptyAuthoritySet(CryptoError):
    pass


class MalformedProof(CryptoError):
    pass


class WitnessStatementMismatch(CryptoError):
    pass


class ProtocolAbort(CryptoError):
    pass


class GrantNotFound(ProtocolAbort):
    pass


class SessionExpired(ProtocolAbort):
    pass


class PokRejected(ProtocolAbort):
    pass


class ConsistencyCheckFailed(ProtocolAbort):
    def __init__(self, which):
        super().__init__(f"Consistency check on {which} failed")
        self.which = which


class Sigma2Rejected(ProtocolAbort):
    pass


class UnblindSanityFailed(CryptoError):
    pass


class AuthenticationFailed(CryptoError):
    pass


class DecryptionMismatch(AuthenticationFailed):
    '''The decapsulated key does not match the key check value.'''


class FormatError(DkpabeError):
    '''Serialized bytes that cannot be decoded.'''


class BadMagic(FormatError):
    pass


class BadVersion(FormatError):
    pass


class BadChecksum(FormatError):
    pass


class TruncatedInput(FormatError, IndexError):
    pass


class FrameTooLarge(FormatError):
    pass
