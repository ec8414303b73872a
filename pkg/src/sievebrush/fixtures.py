"""
    Published results of the RSA-240, RSA-250 and DLP-240 record
    computations, and the checks that they are what they claim to be.
"""

from dataclasses import dataclass
import logging
import time

from sievebrush.arith import PolyZ, is_prime, is_safe_prime, modexp, resultant
from sievebrush.errors import FixtureError


def _int(*chunks):
    return int("".join(chunks))


RSA240 = _int(
    "124620366781718784065835044608106590434820374651678805754818",
    "788883289666801188210855036039570272508747509864768438458621",
    "054865537970253930571891217684318286362846948405301614416430",
    "468066875699415246993185704183030512549594371372159029236099",
)
RSA240_P = _int(
    "509435952285839914555051023580843714132648382024111473186660",
    "296521821206469746700620316443478873837606252372049619334517",
)
RSA240_Q = _int(
    "244624208838318150567813139024002896653802092578931401452041",
    "221336558477095178155258218897735030590669041302045908071447",
)

RSA250 = _int(
    "214032465024074496126442307283933356300861471514475501779775492",
    "088141802344714013664334551909580467961099285187247091458768739",
    "626192155736304745477052080511905649310668769159001975940569345",
    "7452230589325976697471681738069364894699871578494975937497937",
)
RSA250_P = _int(
    "641352894770715802787901901705773890848250147429434472081168596",
    "32024532344630238623598752668347708737661925585694639798853367",
)
RSA250_Q = _int(
    "333720275949781565562260106053551142279407603447675546667845209",
    "87023841729210037080257448673296881877565718986258036932062711",
)

DLP240_P = RSA240 + 49204
DLP240_G = 5
DLP240_Y = int.from_bytes(b"The magic words are still Squeamish Ossifrage", "big")
DLP240_LOG = _int(
    "926031359281441953630949553317328555029610991914376116167294",
    "204758987445623653667881005480990720934875482587528029233264",
    "473672441500961216292648092075981950622133668898591866811269",
    "28982506005127728321426751244111412371767375547225045851716",
)

# polynomial pairs, coefficients low degree first
RSA240_F0 = PolyZ((-105487753732969860223795041295860517380, 17780390513045005995253))
RSA240_F1 = PolyZ((
    -221175588842299117590564542609977016567191860,
    1595712553369335430496125795083146688523,
    179200573533665721310210640738061170,
    974448934853864807690675067037,
    -6381744461279867941961670,
    -4763683724115259920,
    10853204947200,
))
DLP240_F0 = PolyZ((
    -236610408827000256250190838220824122997878994595785432202599,
    -18763697560013016564403953928327121035580409459944854652737,
    24908820300715766136475115982439735516581888603817255539890,
    286512172700675411986966846394359924874576536408786368056,
))
DLP240_F1 = PolyZ((120, 62, 1, 126, 39))
RSA250_F0 = PolyZ((-3256571715934047438664355774734330386901, 185112968818638292881913))
RSA250_F1 = PolyZ((
    -81583513076429048837733781438376984122961112000,
    -1721614429538740120011760034829385792019395,
    -3113627253613202265126907420550648326,
    46262124564021437136744523465879,
    -52733221034966333966198,
    -66689953322631501408,
    86130508464000,
))


@dataclass
class Check:
    fixture: str
    passed: bool
    detail: str = ""

    def __str__(self):
        mark = "ok" if self.passed else "FAILED"
        return f"{self.fixture:<28} {mark}{': ' + self.detail if self.detail else ''}"


def _checks():
    yield "rsa240.product", RSA240_P * RSA240_Q == RSA240, "p * q != RSA-240"
    yield "rsa250.product", RSA250_P * RSA250_Q == RSA250, "p * q != RSA-250"
    for name, n in (("rsa240.p", RSA240_P), ("rsa240.q", RSA240_Q),
                    ("rsa250.p", RSA250_P), ("rsa250.q", RSA250_Q)):
        yield f"{name}.prime", is_prime(n), f"{name} is not prime"
    yield "dlp240.safe_prime", is_safe_prime(DLP240_P), "p is not a safe prime"
    yield ("dlp240.log", modexp(DLP240_G, DLP240_LOG, DLP240_P) == DLP240_Y,
           "5^x != y mod p")
    for name, f0, f1, mult, n in (
        ("rsa240.resultant", RSA240_F0, RSA240_F1, 120, RSA240),
        ("dlp240.resultant", DLP240_F0, DLP240_F1, 540, DLP240_P),
        ("rsa250.resultant", RSA250_F0, RSA250_F1, 48, RSA250),
    ):
        yield name, abs(resultant(f0, f1)) == mult * n, f"|Res(f0, f1)| != {mult} N"


def published_report():
    """Run every published-value check; returns a list of Check."""
    report = []
    start = time.perf_counter()
    for fixture, passed, detail in _checks():
        report.append(Check(fixture, bool(passed), "" if passed else detail))
        logging.debug(str(report[-1]))
    logging.info(f"checked {len(report)} published values in "
                 f"{time.perf_counter() - start:.2f}s")
    return report


def verify_published():
    """Raise FixtureError naming the first published value that fails."""
    report = published_report()
    for check in report:
        if not check.passed:
            raise FixtureError(check.fixture, check.detail)
    return report
