import base64
import hashlib
import json


def encode_to_b64(arg):
    '''Return arg as Base64 encoded string (not as bytes-str).'''
    res = base64.b64encode(arg)
    return res.decode('ascii')


def sha256_digest(arg):
    return hashlib.sha256(arg).digest()


def canonical_json(data):
    '''Key-sorted, whitespace-free JSON; floats keep their repr.'''
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def config_digest_b64(data):
    '''SHA-256 over the canonical JSON of a resolved config, Base64 encoded.

    Written into CSV headers so an output file names the exact parameters
    it was produced from.
    '''
    return encode_to_b64(sha256_digest(canonical_json(data).encode('utf-8')))
