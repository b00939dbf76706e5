'''client.py: Contains the user side of the authority key service: an HTTP transport and the frame driver.'''

import json
import logging
import urllib.error
import urllib.request

from .encoding import Role, decode_as
from .errors import DkpabeError, ProtocolAbort
from .issuing import Phase, UserIssuingSession
from .kpabe import AuthorityPublicKey, GlobalParams, UserKeyShare
from .wire import (DEFAULT_MAX_FRAME, decode_blind_sum_reply, decode_blinded_keys, decode_frame,
                   encode_issue_complete, encode_issue_request)

logger = logging.getLogger(__name__)

FRAME_CONTENT_TYPE = "application/octet-stream"


class HttpTransport:
    '''
    Talks to one authority service.

    Attributes:
        base_url: e.g. "http://127.0.0.1:5000"
        timeout:  Seconds per request.
    '''

    def __init__(self, base_url: str, timeout: float = 120.0):
        if "://" not in base_url:
            base_url = "http://" + base_url
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def exchange(self, data: bytes) -> bytes:
        '''POSTs one frame to /issue and returns the response frame bytes.'''
        request = urllib.request.Request(self.base_url + "/issue", data=data, method="POST",
                                         headers={"Content-Type": FRAME_CONTENT_TYPE})
        return self._open(request)

    def fetch(self, path: str) -> bytes:
        return self._open(urllib.request.Request(self.base_url + path, method="GET"))

    def _open(self, request) -> bytes:
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return response.read()
        except urllib.error.HTTPError as error:
            raise ProtocolAbort(f"Authority service answered {error.code}: {_error_message(error.read())}") from None


def _error_message(body: bytes) -> str:
    try:
        return json.loads(body.decode("utf-8")).get("error", "")
    except (ValueError, AttributeError):
        return body[:200].decode("utf-8", "replace")


def fetch_params(transport) -> GlobalParams:
    return decode_as(transport.fetch("/params"), Role.GLOBAL_PARAMS)


def fetch_public_key(transport, params: GlobalParams) -> AuthorityPublicKey:
    return decode_as(transport.fetch("/public-key"), Role.AUTHORITY_PK, params)


def request_share(params: GlobalParams, pk: AuthorityPublicKey, gid: bytes, transport, pseudonym=None,
                  rng=None, keypair=None, self_test: bool = False,
                  max_frame: int = DEFAULT_MAX_FRAME) -> UserKeyShare:
    '''
    Runs one blind issuance against an authority service and returns the unblinded key share.

    transport needs exchange(frame bytes) -> frame bytes; an ERROR frame from the service is raised here.
    '''
    session = UserIssuingSession(params, pk, gid, pseudonym, rng, keypair)
    try:
        request = session.start()
        response = transport.exchange(encode_issue_request(params, request).to_bytes())
        complete = session.handle_reply(decode_blind_sum_reply(decode_frame(response, max_frame)))

        response = transport.exchange(encode_issue_complete(params, complete).to_bytes())
        keys = decode_blinded_keys(params, pk, session.blinded_bases, decode_frame(response, max_frame))
        share = session.finalize(keys, self_test)
    except DkpabeError:
        if session.phase != Phase.ABORTED:
            session.abort()
        logger.warning("session=%s phase=client authority=%d outcome=abort",
                       session.session_id.hex(), pk.authority_id)
        raise
    logger.info("session=%s phase=client authority=%d outcome=ok", session.session_id.hex(), pk.authority_id)
    return share
