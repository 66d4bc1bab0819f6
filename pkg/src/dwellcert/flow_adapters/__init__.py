"""This package contains flow map adapters for dynamics that do not live in
the dwellcert process.

Each adapter turns some outside simulator into dwellcert.core.FlowMapHandle
instances, one per mode, so that the certification and training code can use
it like a builtin system.
"""
