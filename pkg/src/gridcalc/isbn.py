"""Independent check-digit oracles for ISBN-10, ISBN-13, and ISSN.

Implemented directly from the published check-digit arithmetic, with no
engine code involved, so they can stand as independent ground truth for
the workbook formulas. Malformed candidates are simply invalid.
"""

from __future__ import annotations


def isbn10_check_char(digits: str) -> str:
    """Check character for a 9-digit ISBN-10 prefix ('0'-'9' or 'X')."""
    if len(digits) != 9 or not digits.isdigit():
        raise ValueError("need exactly nine digits")
    total = sum((10 - i) * int(d) for i, d in enumerate(digits))
    check = (11 - total % 11) % 11
    return "X" if check == 10 else str(check)


def isbn10_valid(candidate: str) -> bool:
    """True for a 10-character ISBN whose weighted sum is 0 mod 11.

    The first nine characters must be digits; the last may be a digit or
    X/x (worth 10).
    """
    if len(candidate) != 10 or not candidate[:9].isdigit():
        return False
    last = candidate[9]
    if last in "Xx":
        check = 10
    elif last.isdigit():
        check = int(last)
    else:
        return False
    total = sum((10 - i) * int(d) for i, d in enumerate(candidate[:9])) + check
    return total % 11 == 0


def isbn13_check_digit(digits: str) -> str:
    """Check digit for a 12-digit ISBN-13 prefix."""
    if len(digits) != 12 or not digits.isdigit():
        raise ValueError("need exactly twelve digits")
    total = sum(int(d) * w for d, w in zip(digits, (1, 3) * 6))
    return str((10 - total % 10) % 10)


def isbn13_valid(candidate: str) -> bool:
    """True for a 13-digit ISBN whose alternating 1,3-weighted sum checks out."""
    if len(candidate) != 13 or not candidate.isdigit():
        return False
    return isbn13_check_digit(candidate[:12]) == candidate[12]


def issn_check_char(digits: str) -> str:
    """Check character for a 7-digit ISSN prefix ('0'-'9' or 'X')."""
    if len(digits) != 7 or not digits.isdigit():
        raise ValueError("need exactly seven digits")
    total = sum(int(d) * w for d, w in zip(digits, range(8, 1, -1)))
    check = (11 - total % 11) % 11
    return "X" if check == 10 else str(check)


def issn_valid(candidate: str) -> bool:
    """True for an 8-character ISSN (hyphen-free) with a correct check char."""
    if len(candidate) != 8 or not candidate[:7].isdigit():
        return False
    last = candidate[7]
    if not (last.isdigit() or last in "Xx"):
        return False
    return issn_check_char(candidate[:7]) == last.upper()
