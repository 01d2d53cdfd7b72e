def field_inverse(element, order):
    """
    Multiplicative inverse in the scalar field Z_order of the pairing group, used to make polynomials
    monic and to divide by leading coefficients.

    :type element: int
    :param order: the prime group order
    :type order: int
    :rtype: int
    """
    if element % order == 0:
        raise ZeroDivisionError("zero has no inverse in the scalar field")

    return pow(element, -1, order)


class Polynomial:
    """
    Dense univariate polynomial over Z[p].
    Coefficients are stored from the constant term upwards, without trailing zeros.

    n, m - degrees of the operands
    Multiplication / division Time Complexity: O(n * m)
    """
    __slots__ = ("coefficients", "modulus")

    def __init__(self, coefficients, modulus):
        """
        :param coefficients: c0, c1, ... such that P(x) = sigma{ci * x^i}
        :type coefficients: iterable[int]
        :param modulus: prime field order
        :type modulus: int
        """
        coefficients = [c % modulus for c in coefficients]
        while coefficients and coefficients[-1] == 0:
            coefficients.pop()

        self.coefficients = tuple(coefficients)
        self.modulus = modulus

    @classmethod
    def constant(cls, value, modulus):
        return cls([value], modulus)

    @classmethod
    def from_roots(cls, roots, modulus):
        """
        Expand PI{(x + root)} in coefficient form.

        Time Complexity: O(#roots^2)
        Space Complexity: O(#roots)

        :param roots: values a_i of the linear factors (x + a_i), repeated by multiplicity.
        :type roots: iterable[int]
        :type modulus: int
        :rtype: Polynomial
        """
        coefficients = [1]
        for root in roots:
            # (c0 + c1*x + ...) * (root + x)
            shifted = [0] + coefficients
            for i, coefficient in enumerate(coefficients):
                shifted[i] = (shifted[i] + coefficient * root) % modulus
            coefficients = shifted

        return cls(coefficients, modulus)

    @classmethod
    def product_mod(cls, roots, divisor):
        """
        Compute PI{(x + root)} mod divisor without expanding the full product.

        Time Complexity: O(#roots * deg(divisor))

        :type roots: iterable[int]
        :type divisor: Polynomial
        :rtype: Polynomial
        """
        result = cls.constant(1, divisor.modulus)
        for root in roots:
            result = (result * cls([root, 1], divisor.modulus)) % divisor

        return result

    @property
    def degree(self):
        """
        Degree of the polynomial, -1 for the zero polynomial.
        """
        return len(self.coefficients) - 1

    @property
    def is_zero(self):
        return not self.coefficients

    @property
    def leading(self):
        return self.coefficients[-1] if self.coefficients else 0

    def evaluate(self, x):
        """
        Horner evaluation in Z[p].

        :type x: int
        :rtype: int
        """
        value = 0
        for coefficient in reversed(self.coefficients):
            value = (value * x + coefficient) % self.modulus

        return value

    def scale(self, factor):
        return Polynomial([c * factor for c in self.coefficients], self.modulus)

    def monic(self):
        """
        :return: (monic polynomial, inverse of the leading coefficient used for scaling)
        :rtype: tuple[Polynomial, int]
        """
        inverse = field_inverse(self.leading, self.modulus)
        return self.scale(inverse), inverse

    def __add__(self, other):
        size = max(len(self.coefficients), len(other.coefficients))
        return Polynomial(
            [self._at(i) + other._at(i) for i in range(size)],
            self.modulus
        )

    def __sub__(self, other):
        size = max(len(self.coefficients), len(other.coefficients))
        return Polynomial(
            [self._at(i) - other._at(i) for i in range(size)],
            self.modulus
        )

    def __mul__(self, other):
        if self.is_zero or other.is_zero:
            return Polynomial([], self.modulus)

        product = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            if a == 0:
                continue
            for j, b in enumerate(other.coefficients):
                product[i + j] += a * b

        return Polynomial(product, self.modulus)

    def __divmod__(self, divisor):
        """
        Long division.

        Time Complexity: O(deg(self) * deg(divisor))

        :type divisor: Polynomial
        :return: (quotient, remainder)
        :rtype: tuple[Polynomial, Polynomial]
        """
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")

        remainder = list(self.coefficients)
        if len(remainder) < len(divisor.coefficients):
            return Polynomial([], self.modulus), self

        inverse_leading = field_inverse(divisor.leading, self.modulus)
        divisor_degree = divisor.degree
        quotient = [0] * (len(remainder) - divisor_degree)
        for shift in range(len(quotient) - 1, -1, -1):
            factor = (remainder[shift + divisor_degree] * inverse_leading) % self.modulus
            quotient[shift] = factor
            if factor == 0:
                continue
            for i, coefficient in enumerate(divisor.coefficients):
                remainder[shift + i] = (remainder[shift + i] - factor * coefficient) % self.modulus

        return Polynomial(quotient, self.modulus), Polynomial(remainder[:divisor_degree], self.modulus)

    def __floordiv__(self, divisor):
        return divmod(self, divisor)[0]

    def __mod__(self, divisor):
        return divmod(self, divisor)[1]

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.modulus == other.modulus
            and self.coefficients == other.coefficients
        )

    def __hash__(self):
        return hash((self.coefficients, self.modulus))

    def __repr__(self):
        return f"Polynomial({list(self.coefficients)}, p={self.modulus})"

    def _at(self, index):
        return self.coefficients[index] if index < len(self.coefficients) else 0


def extended_gcd(a, b):
    """
    Extended Euclidean Algorithm over Z[p][x].
    The running remainder is normalized to a monic polynomial on every step, so the returned gcd is monic
    (gcd == 1 for coprime inputs).

    Time Complexity: O(deg(a) * deg(b))
    Space Complexity: O(deg(a) + deg(b))

    :type a: Polynomial
    :type b: Polynomial
    :return: (s, t, gcd(a, b)) s.t. a * s + b * t = gcd(a, b)
    :rtype: tuple[Polynomial, Polynomial, Polynomial]
    """
    if a.is_zero and b.is_zero:
        raise ZeroDivisionError("gcd(0, 0) is undefined")

    modulus = a.modulus
    one = Polynomial.constant(1, modulus)
    zero = Polynomial([], modulus)

    # r(i) = a * s(i) + b * t(i) holds for every pair below
    old_r, old_s, old_t = a, one, zero
    r, s, t = b, zero, one
    if not old_r.is_zero:
        old_r, inverse = old_r.monic()
        old_s, old_t = old_s.scale(inverse), old_t.scale(inverse)

    while not r.is_zero:
        r, inverse = r.monic()
        s, t = s.scale(inverse), t.scale(inverse)

        q, remainder = divmod(old_r, r)
        old_r, r = r, remainder
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t

    return old_s, old_t, old_r
