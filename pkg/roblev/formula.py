from dataclasses import dataclass
from enum import Enum, auto, unique
from typing import Optional, Tuple

from .errors import FormulaError

OPERATORS = "~+-*:()"
# characters with an operator meaning in other formula
# dialects, rejected with a more helpful message
FOREIGN_OPERATORS = "^/|%=<>!&$"

@unique
class Kind(Enum):
    CATEGORICAL = auto()
    CONTINUOUS = auto()

@dataclass(frozen=True)
class Term:
    """
    A model term: a main effect if it has a single factor,
    an interaction otherwise. kinds is None until the term
    has been bound to a dataset, afterwards it holds one
    Kind per factor.
    """
    factors: Tuple[str, ...]
    kinds: Optional[Tuple[Kind, ...]] = None

    @property
    def order(self):
        return len(self.factors)

    def key(self):
        "Identity of the term irrespective of factor order."
        return frozenset(self.factors)

    def bind(self, kinds):
        return Term(self.factors, tuple(kinds[f] for f in self.factors))

    def render(self):
        return ":".join(self.factors)

@dataclass(frozen=True)
class ModelSpec:
    response: Optional[str]
    terms: Tuple[Term, ...]
    intercept: bool = True

    @property
    def variables(self):
        "Predictor variables in order of first appearance."
        seen = []
        for t in self.terms:
            for f in t.factors:
                if f not in seen:
                    seen.append(f)
        return tuple(seen)

    def render(self):
        return render(self)

class PositionedIterator(object):
    """
    Wrapper class which implements the iterator interface
    for a string. In contrast to the default implementation
    it works by tracking an index in the string internally.

    This allows the following additional features:

    * Checking whether the iterator has any elements left
      using empty()
    * Looking at the upcoming element via peek() and consuming
      a run of elements via takewhile()

    The object exposes the following attributes:

    * pos: the index of the last element received via __next__()
    * wrapped: the string used for construction
    """
    def __init__(self, s):
        # always points to the position of the element
        # just received via __next__()
        self.pos = -1
        self.wrapped = s

    def peek(self):
        """
        Return the next element without consuming it,
        or None if the input is exhausted.
        """
        if self.empty():
            return None
        return self.wrapped[self.pos + 1]

    def takewhile(self, f):
        """
        Consume elements while the given predicate returns True for
        the upcoming element and return them as a string slice. The
        first element the predicate rejects is not consumed. Unlike
        itertools.takewhile, running into the end of input simply
        ends the slice.
        """
        start = self.pos + 1
        while not self.empty() and f(self.wrapped[self.pos + 1]):
            self.pos += 1

        return self.wrapped[start:self.pos + 1]

    def empty(self):
        """
        Check if the iterator has no elements left
        without consuming the next item (if any).
        """
        return self.pos + 1 == len(self.wrapped)

    def __iter__(self):
        return self

    def __next__(self):
        self.pos += 1

        try:
            return self.wrapped[self.pos]
        except IndexError:
            self.pos -= 1
            raise StopIteration

class TokenType(Enum):
    NAME = auto()
    NUMBER = auto()
    OPERATOR = auto()
    END = auto()

@dataclass(frozen=True)
class Token:
    type: TokenType
    text: str
    pos: int

def name_start(c):
    return c.isalpha() or c in "_."

def name_char(c):
    return c.isalnum() or c in "_."

def tokenize(text):
    """
    Split formula text into a list of tokens terminated by an END
    token. Raises FormulaError on characters which can't start a
    token.
    """
    it = PositionedIterator(text)
    tokens = []

    for c in it:
        pos = it.pos
        if c.isspace():
            continue
        elif c in OPERATORS:
            tokens.append(Token(TokenType.OPERATOR, c, pos))
        elif name_start(c):
            tokens.append(Token(TokenType.NAME, c + it.takewhile(name_char), pos))
        elif c.isdigit():
            digits = c + it.takewhile(str.isdigit)
            # a number directly followed by letters (e.g. 1a) is not a name
            if it.peek() is not None and name_char(it.peek()):
                raise FormulaError(F"malformed name starting with '{digits}'", pos)
            tokens.append(Token(TokenType.NUMBER, digits, pos))
        elif c in FOREIGN_OPERATORS:
            raise FormulaError(F"unknown operator '{c}'", pos)
        else:
            raise FormulaError(F"unexpected character '{c}'", pos)

    tokens.append(Token(TokenType.END, "", len(text)))
    return tokens

@dataclass(frozen=True)
class InterceptMarker:
    "Value of a literal 0 or 1 in a term expression."
    present: bool
    pos: int

def merge(x, y):
    "Factors of the interaction x:y, order of first appearance."
    return x + tuple(f for f in y if f not in x)

def union(*groups):
    "Concatenate lists of factor tuples, dropping repeated terms."
    out, seen = [], set()
    for group in groups:
        for t in group:
            if frozenset(t) not in seen:
                seen.add(frozenset(t))
                out.append(t)
    return out

class Parser(object):
    """
    Recursive descent parser for the formula grammar:

      formula := [NAME] '~' sum
      sum     := ['-'] product (('+' | '-') product)*
      product := inter ('*' inter)*
      inter   := atom (':' atom)*
      atom    := NAME | '0' | '1' | '(' sum ')'

    Term sets are represented as lists of factor tuples while
    parsing, the literals 0 and 1 as InterceptMarker.
    """
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        if tok.type is not TokenType.END:
            self.idx += 1
        return tok

    def at(self, op):
        tok = self.peek()
        return tok.type is TokenType.OPERATOR and tok.text == op

    def expect(self, op):
        if not self.at(op):
            self.unexpected(F"expected '{op}'")
        return self.advance()

    def unexpected(self, what=None):
        tok = self.peek()
        found = "end of formula" if tok.type is TokenType.END else F"'{tok.text}'"
        msg = F"unexpected {found}" if what is None else F"{what}, found {found}"
        raise FormulaError(msg, tok.pos)

    def parse(self):
        response = None
        if self.peek().type is TokenType.NAME and \
                self.tokens[self.idx + 1].text == "~":
            response = self.advance().text
        self.expect("~")

        intercept, terms = self.sum(toplevel=True)
        if self.peek().type is not TokenType.END:
            self.unexpected()

        # main effects first, then interactions by ascending order;
        # sorted() is stable so appearance order is kept within an order
        terms = sorted(union(terms), key=len)
        return ModelSpec(response, tuple(Term(t) for t in terms), intercept)

    def sum(self, toplevel=False):
        intercept = True
        terms = []

        sign = "+"
        if self.at("-"):
            sign = self.advance().text

        while True:
            pos = self.peek().pos
            value = self.product()

            if isinstance(value, InterceptMarker):
                if not toplevel:
                    raise FormulaError("intercept literal inside parentheses", value.pos)
                intercept = value.present if sign == "+" else not value.present
            elif sign == "-":
                raise FormulaError("unknown operator '-': only the intercept can be removed", pos)
            else:
                terms = union(terms, value)

            if self.at("+") or self.at("-"):
                sign = self.advance().text
            else:
                return intercept, terms

    def product(self):
        left = self.interaction()
        while self.at("*"):
            op = self.advance()
            right = self.interaction()
            if isinstance(left, InterceptMarker) or isinstance(right, InterceptMarker):
                raise FormulaError("intercept literal in a product", op.pos)
            left = union(left, right, [merge(x, y) for x in left for y in right])

        return left

    def interaction(self):
        left = self.atom()
        while self.at(":"):
            op = self.advance()
            right = self.atom()
            if isinstance(left, InterceptMarker) or isinstance(right, InterceptMarker):
                raise FormulaError("intercept literal in an interaction", op.pos)
            left = union([merge(x, y) for x in left for y in right])

        return left

    def atom(self):
        tok = self.peek()
        if tok.type is TokenType.NAME:
            self.advance()
            return [(tok.text,)]
        elif tok.type is TokenType.NUMBER:
            if tok.text not in ("0", "1"):
                raise FormulaError(F"unexpected number '{tok.text}'", tok.pos)
            self.advance()
            return InterceptMarker(tok.text == "1", tok.pos)
        elif self.at("("):
            self.advance()
            _, terms = self.sum()
            self.expect(")")
            if not terms:
                raise FormulaError("empty term", tok.pos)
            return terms
        else:
            self.unexpected("empty term")

def parse_formula(text):
    """
    Parse a model formula such as "y ~ age + dose * group" into a
    ModelSpec. a*b expands to a + b + a:b, a:b is a pure
    interaction, 1 requests the intercept (the default) and -1 or
    0 removes it. Raises FormulaError pointing at the offending
    character on failure.
    """
    if not text or not text.strip():
        raise FormulaError("empty formula")

    return Parser(text).parse()

def render(spec):
    """
    Render a ModelSpec in canonical form. The result parses
    back into an identical (unbound) ModelSpec.
    """
    lhs = "" if spec.response is None else spec.response + " "
    if not spec.terms:
        return F"{lhs}~ {1 if spec.intercept else 0}"

    rhs = " + ".join(t.render() for t in spec.terms)
    if not spec.intercept:
        rhs += " - 1"

    return F"{lhs}~ {rhs}"
