"""Static bearer-token authentication.

Tokens map to a user and a set of scopes; every REST route checks exactly
one scope.  The token table is loaded from the service config file.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from fedfaas.service.errors import Unauthorized

SCOPE_REGISTER_FUNCTION = "register_function"
SCOPE_RUN = "run"
SCOPE_ENDPOINT_REGISTER = "endpoint_register"

ALL_SCOPES = frozenset(
    {SCOPE_REGISTER_FUNCTION, SCOPE_RUN, SCOPE_ENDPOINT_REGISTER}
)


@dataclass(frozen=True)
class AuthToken:
    token: str
    user: str
    scopes: frozenset[str] = field(default_factory=frozenset)


class Authenticator:
    def __init__(self, tokens: dict[str, AuthToken]) -> None:
        self._tokens = dict(tokens)

    def authenticate(self, bearer: str | None, required_scope: str) -> AuthToken:
        if required_scope not in ALL_SCOPES:
            raise ValueError(f"unknown scope {required_scope}")
        if not bearer:
            raise Unauthorized("missing bearer token")
        token = self._tokens.get(bearer)
        if token is None:
            raise Unauthorized("unknown token")
        if required_scope not in token.scopes:
            raise Unauthorized(f"token lacks scope {required_scope}")
        return token
