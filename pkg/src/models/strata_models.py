from collections import Counter
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, root_validator

from src.errors import NotAGroupError
from src.models.affine import AffineDiffeo
from src.models.fields import KForm, SymTensor2
from src.models.symmetry_models import GroupElement


class FiniteSymmetryGroup(BaseModel):
    """
    Finite subgroup of GDiff_H (or of its odd analogue).
    - elements: List[GroupElement] - members, identity first.
    - table: List[List[int]] - table[i][j] is the index of elements[i]·elements[j].
    Products are resolved through the underlying diffeomorphisms, which determine the
    B-field (and A-field) parts of isometries uniquely.
    """
    elements: List[GroupElement]
    table: List[List[int]]

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def consistent_table(cls, values):
        elements, table = values["elements"], values["table"]
        if not elements or not elements[0].phi.is_identity():
            raise NotAGroupError("group must list the identity first")
        order = len(elements)
        if len(table) != order or any(len(row) != order for row in table):
            raise NotAGroupError(f"multiplication table is not {order}x{order}")
        for row in table:
            if sorted(row) != list(range(order)):
                raise NotAGroupError("multiplication table rows are not permutations")
        return values

    @classmethod
    def from_elements(cls, elements: List[GroupElement]) -> "FiniteSymmetryGroup":
        """:raises NotAGroupError: when the diffeomorphisms are not closed under composition."""
        identity = [element for element in elements if element.phi.is_identity()]
        if not identity:
            raise NotAGroupError("element list has no identity")
        ordered = identity[:1] + [element for element in elements if not element.phi.is_identity()]
        index = {element.phi.key: position for position, element in enumerate(ordered)}
        if len(index) != len(ordered):
            raise NotAGroupError("two elements share a diffeomorphism")
        table = []
        for left in ordered:
            row = []
            for right in ordered:
                key = left.phi.compose(right.phi).key
                if key not in index:
                    raise NotAGroupError(f"product {key} of two members is not a member")
                row.append(index[key])
            table.append(row)
        return cls(elements=ordered, table=table)

    @property
    def order(self) -> int:
        return len(self.elements)

    def keys(self) -> List[Tuple[int, ...]]:
        return [element.phi.key for element in self.elements]

    def projection(self) -> List[AffineDiffeo]:
        """Π(G): the underlying diffeomorphisms."""
        return [element.phi for element in self.elements]

    def element_order(self, position: int) -> int:
        current, power = position, 1
        while current != 0:
            current = self.table[current][position]
            power += 1
        return power

    def element_orders(self) -> List[int]:
        return [self.element_order(position) for position in range(self.order)]

    def order_profile(self) -> Dict[str, int]:
        """Histogram of (ord a, ord b, ord ab) over all pairs, an isomorphism invariant."""
        orders = self.element_orders()
        profile = Counter()
        for a in range(self.order):
            for b in range(self.order):
                profile[f"{orders[a]}-{orders[b]}-{orders[self.table[a][b]]}"] += 1
        return dict(sorted(profile.items()))

    def contains_diffeos(self, other: "FiniteSymmetryGroup") -> bool:
        return set(other.keys()) <= set(self.keys())


class StratumLabel(BaseModel):
    """
    Conjugacy-class label of a finite isometry group.
    - order: int - group order.
    - table_hash: str - sha256 of the order profile of the multiplication table.
    - harmonic_signature: List[Tuple[int, int]] - sorted traces of φ* on H¹ and H².
    - class_index: int - index of the conjugacy class within the classified list.
    - representative: int - position of the class representative in the classified list.
    """
    order: int
    table_hash: str
    harmonic_signature: List[Tuple[int, int]]
    class_index: int
    representative: int

    def bucket(self) -> Tuple:
        return self.order, self.table_hash, tuple(self.harmonic_signature)


class PerturbationResult(BaseModel):
    """
    Outcome of the invariant-perturbation search.
    - found: bool - a breaking perturbation was certified.
    - h: Optional[SymTensor2] - averaged metric perturbation.
    - omega_h: Optional[KForm] - averaged 2-form perturbation.
    - mode: Dict - lattice mode that produced the perturbation.
    - certificate: Dict[str, bool] - per step t, whether the group was kept and the larger one broken.
    - lattice_bound: int - largest wavevector entry searched.
    """
    found: bool
    h: Optional[SymTensor2] = None
    omega_h: Optional[KForm] = None
    mode: Dict = {}
    certificate: Dict[str, bool] = {}
    lattice_bound: int

    class Config:
        arbitrary_types_allowed = True
