# SPDX-FileCopyrightText: 2024-present cronus42 <cronus@example.com>
#
# SPDX-License-Identifier: MIT
from ris_noma.__about__ import __version__

__all__ = ["__version__"]
