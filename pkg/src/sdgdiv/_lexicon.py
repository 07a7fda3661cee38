"""Bundled part-of-speech lexicon: one most-frequent tag per word form.

The lexicon is generated at import time from curated stem lists plus
deterministic inflection rules (noun plurals, regular verb forms), so it is
reproducible and needs no data files. Assignment order resolves ambiguous
words: verb forms first, then adjectives, then nouns (so noun/verb words
like "increase" surface as NOUN, which is what phrase extraction wants),
then closed-class words, then explicit overrides.

Words not covered here fall back to the suffix rules in phrase_pipeline.
"""

from __future__ import annotations

DETERMINERS = """
the a an this that these those each every either neither some any no
another both all several many much more most few little various certain
such what which whose its their his her our your my
""".split()

# Closed-class words that must never begin or extend a noun phrase.
FUNCTION_WORDS = """
and or but nor so yet if then than because although though while when
whenever where wherever after before until unless since as of in on at by
for with without from to into onto over under between among through
during within across along around about against toward towards upon off
up down out not only also just even still too very quite rather almost
nearly always often sometimes never again once twice there here now
today yesterday tomorrow however therefore moreover furthermore
nevertheless meanwhile instead otherwise thus hence accordingly
it he she they we you i them him us me who whom itself himself herself
themselves ourselves myself yourself one ones something anything nothing
everything someone anyone everyone nobody
""".split()

MODAL_AUX = """
be am is are was were been being have has had having do does did doing
done will would shall should can could may might must ought
""".split()

IRREGULAR_VERB_FORMS = """
go goes went gone going make makes made making take takes took taken
taking find finds found finding give gives gave given giving know knows
knew known knowing think thinks thought thinking see sees saw seen seeing
get gets got gotten getting come comes came coming become becomes became
becoming lead leads led leading bring brings brought bringing build
builds built building hold holds held holding keep keeps kept keeping
leave leaves left leaving mean means meant meaning meet meets met meeting
pay pays paid paying put puts putting read reads reading rise rises rose
risen rising run runs ran running say says said saying sell sells sold
selling send sends sent sending set sets setting show shows showed shown
showing spend spends spent spending stand stands stood standing teach
teaches taught teaching tell tells told telling understand understands
understood understanding write writes wrote written writing draw draws
drew drawn drawing drive drives drove driven driving fall falls fell
fallen falling feel feels felt feeling fight fights fought fighting grow
grows grew grown growing choose chooses chose chosen choosing seek seeks
sought seeking spread spreads spreading matters mattered mattering
""".split()

REGULAR_VERB_STEMS = """
provide increase reduce improve develop create support promote ensure
achieve require include involve affect influence enhance examine explore
investigate consider compare determine evaluate identify observe obtain
occur perform predict present produce propose protect receive reflect
relate remain remove report represent result reveal suggest test use
validate vary demonstrate describe discuss enable encourage establish
estimate expand explain facilitate focus follow foster generate help
implement indicate inform integrate introduce limit maintain manage
measure mitigate monitor need offer operate participate plan prevent
prioritize address adopt advance aim allocate allow analyze apply
argue assess associate assume attempt base calculate capture cause
challenge change collect combine conclude conduct confirm connect
conserve constrain construct consume contribute control cover decline
decrease define deliver depend derive detect differ discover distribute
document earn emerge emphasize employ empower engage enroll evolve
expect experience explore express extend extract fail finance fund gain
highlight hire illustrate impact implement imply import incorporate
invest link live locate lower model motivate note notice organize
outline overcome own perceive persist point prepare preserve process
publish pursue raise rank rate reach recognize recommend record recover
regulate reinforce reject rely replace respond restore retain return
review revise sample save scale select serve share shift simulate solve
specify strengthen stress structure study submit succeed summarize
supply sustain target train transform translate treat trust update
utilize value view want warn waste weaken widen work link
""".split()

ADJECTIVES = """
sustainable economic social environmental global important significant
effective efficient innovative inclusive equitable digital financial
educational technological agricultural industrial urban rural public
private national international regional local renewable clean green
healthy safe poor rich low high new old large small major minor key
critical essential relevant recent current future potential possible
available accessible affordable productive modern strong weak broad
narrow deep rapid slow early late primary secondary tertiary basic
advanced complex simple diverse equal unequal fair unfair stable
political cultural scientific academic empirical theoretical statistical
structural institutional legal ethical medical clinical mental physical
human natural common unique different similar distinct specific general
overall total average annual long short female male young elderly
vulnerable marginalized disadvantaged remote central main good bad
positive negative direct indirect formal informal dominant scarce
abundant robust fragile resilient adaptive smart circular organic
decent full productive higher lower greater larger smaller stronger
weaker better best worse worst wide widespread substantial considerable
moderate severe acute chronic persistent joint mutual collective
individual regional transnational domestic foreign gross net causal
empirical longitudinal qualitative quantitative systematic comparative
""".split()

PLURAL_ONLY_NOUNS = """
data women men children people media criteria phenomena analyses
countries studies policies bodies economies technologies societies
communities universities opportunities inequalities industries
strategies families cities
""".split()

NOUN_STEMS = """
development growth education gender equality health policy research
energy water climate poverty employment work labor labour economy
innovation infrastructure industry technology country region community
woman man child school university student teacher income wage job market
trade investment resource system analysis model study result impact
effect access quality level rate number change increase decrease
reduction improvement sustainability inequality opportunity society
sector service program programme project goal target indicator measure
framework approach method process outcome factor challenge risk benefit
cost value knowledge skill capacity training science article review
journal publication author paper database classification matter world
area field domain issue problem question answer datum sample survey
population group age household family city town village nation state
government institution organization organisation agency bank fund
finance budget tax debt credit loan capital asset wealth welfare aid
assistance support network partnership cooperation collaboration
agreement law regulation standard norm right freedom justice equity
inclusion exclusion discrimination gap divide disparity difference
distribution share proportion percentage ratio index score test exam
degree diploma curriculum literacy numeracy skill course lesson class
teacher professor researcher scientist engineer doctor nurse patient
disease illness infection virus pandemic epidemic vaccine treatment
therapy medicine hospital clinic care nutrition food agriculture crop
farm farmer soil seed harvest fishery forest land water sanitation
hygiene waste pollution emission carbon footprint biodiversity
ecosystem habitat species conservation protection adaptation mitigation
disaster hazard flood drought storm temperature warming environment
transport mobility vehicle road railway port airport housing building
construction electricity grid power plant fuel gas oil coal solar wind
hydrogen battery material mineral metal steel cement product production
manufacturing factory firm company business enterprise entrepreneur
startup corporation supply chain logistics export import tariff price
inflation recession crisis shock recovery resilience stability
volatility employment unemployment vacancy occupation profession career
salary earning pension insurance security safety crime violence
conflict war peace migration migrant refugee remittance tourism culture
heritage language religion identity ethnicity race minority majority
participation representation democracy governance corruption
transparency accountability leadership management administration
planning strategy vision mission objective priority agenda reform
intervention initiative campaign movement advocacy awareness attitude
behavior behaviour perception opinion belief trust confidence
satisfaction wellbeing happiness quality life standard living condition
circumstance context situation trend pattern dynamic relationship
correlation regression estimation prediction projection scenario
simulation optimization algorithm computation software hardware device
internet web platform application tool instrument technique procedure
protocol experiment observation measurement evaluation assessment
monitoring reporting documentation literature theory concept definition
hypothesis assumption limitation implication contribution finding
insight evidence conclusion recommendation summary abstract keyword
source reference citation dataset corpus vocabulary term phrase word
sentence text document record item entry list table figure chart graph
map diagram report statistic
""".split()

OVERRIDES = {
    # pinned tags where generated inflections would mislead
    "matters": "VERB",
    "means": "VERB",
    "supports": "VERB",
    "shares": "VERB",
    "aims": "VERB",
    "results": "NOUN",
    "studies": "NOUN",
    "increases": "NOUN",
    "measures": "NOUN",
    "living": "ADJ",
    "developing": "ADJ",
    "emerging": "ADJ",
    "growing": "ADJ",
}


def _plural(noun: str) -> str:
    if noun.endswith(("s", "x", "z", "ch", "sh")):
        return noun + "es"
    if len(noun) > 2 and noun.endswith("y") and noun[-2] not in "aeiou":
        return noun[:-1] + "ies"
    return noun + "s"


def _verb_forms(stem: str) -> list[str]:
    forms = [stem]
    if stem.endswith(("s", "x", "z", "ch", "sh")):
        forms.append(stem + "es")
    elif len(stem) > 2 and stem.endswith("y") and stem[-2] not in "aeiou":
        forms.append(stem[:-1] + "ies")
    else:
        forms.append(stem + "s")
    if stem.endswith("e"):
        forms.append(stem + "d")
        forms.append(stem[:-1] + "ing")
    elif len(stem) > 2 and stem.endswith("y") and stem[-2] not in "aeiou":
        forms.append(stem[:-1] + "ied")
        forms.append(stem + "ing")
    else:
        forms.append(stem + "ed")
        forms.append(stem + "ing")
    return forms


def build_lexicon() -> dict[str, str]:
    lexicon: dict[str, str] = {}
    for stem in REGULAR_VERB_STEMS:
        for form in _verb_forms(stem):
            lexicon[form] = "VERB"
    for form in IRREGULAR_VERB_FORMS:
        lexicon[form] = "VERB"
    for word in ADJECTIVES:
        lexicon[word] = "ADJ"
    for stem in NOUN_STEMS:
        lexicon[stem] = "NOUN"
        lexicon[_plural(stem)] = "NOUN"
    for word in PLURAL_ONLY_NOUNS:
        lexicon[word] = "NOUN"
    for word in MODAL_AUX:
        lexicon[word] = "VERB"
    for word in FUNCTION_WORDS:
        lexicon[word] = "OTHER"
    for word in DETERMINERS:
        lexicon[word] = "DET"
    lexicon.update(OVERRIDES)
    return lexicon


LEXICON = build_lexicon()
