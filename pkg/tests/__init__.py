# Tests for ris-noma
