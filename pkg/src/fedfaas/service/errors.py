"""Service error taxonomy; codes are the REST contract for clients."""
from __future__ import annotations


class ServiceError(Exception):
    code = "ServiceError"
    http_status = 500

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.code)
        self.message = message or self.code


class Unauthorized(ServiceError):
    code = "Unauthorized"
    http_status = 401


class MalformedBody(ServiceError):
    code = "MalformedBody"
    http_status = 400


class PayloadTooLarge(ServiceError):
    code = "PayloadTooLarge"
    http_status = 413


class UnknownFunction(ServiceError):
    code = "UnknownFunction"
    http_status = 404


class UnknownEndpoint(ServiceError):
    code = "UnknownEndpoint"
    http_status = 404


class UnknownTask(ServiceError):
    code = "UnknownTask"
    http_status = 404


class ResultPurged(ServiceError):
    code = "ResultPurged"
    http_status = 410
