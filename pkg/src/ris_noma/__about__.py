# SPDX-FileCopyrightText: 2024-present cronus42 <cronus@example.com>
#
# SPDX-License-Identifier: MIT
__version__ = "0.1.0"
