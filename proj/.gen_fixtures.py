#!/usr/bin/env python3
# One-off generator for shipped data files and committed test fixtures.
import hashlib, json, os, random

ROOT = os.path.dirname(os.path.abspath(__file__))

# ---- prompts/manifest.json ----------------------------------------------
pdir = os.path.join(ROOT, "prompts")
manifest = {}
for fn in sorted(os.listdir(pdir)):
    if not fn.endswith(".txt"):
        continue
    with open(os.path.join(pdir, fn), "rb") as f:
        manifest[fn] = hashlib.sha256(f.read()).hexdigest()
with open(os.path.join(pdir, "manifest.json"), "w") as f:
    json.dump(manifest, f, indent=2, sort_keys=True)
    f.write("\n")

# ---- data/places.csv ------------------------------------------------------
cities = [
    "Tokyo","Delhi","Shanghai","Sao Paulo","Mexico City","Cairo","Mumbai","Beijing",
    "Dhaka","Osaka","New York","Karachi","Buenos Aires","Chongqing","Istanbul","Kolkata",
    "Manila","Lagos","Rio de Janeiro","Tianjin","Kinshasa","Guangzhou","Los Angeles","Moscow",
    "Shenzhen","Lahore","Bangalore","Paris","Bogota","Jakarta","Chennai","Lima",
    "Bangkok","Seoul","Nagoya","Hyderabad","London","Tehran","Chicago","Chengdu",
    "Nanjing","Wuhan","Ho Chi Minh City","Luanda","Ahmedabad","Kuala Lumpur","Hong Kong","Riyadh",
    "Baghdad","Santiago","Surat","Madrid","Suzhou","Pune","Harbin","Houston",
    "Dallas","Toronto","Dar es Salaam","Miami","Belo Horizonte","Singapore","Philadelphia","Atlanta",
    "Fukuoka","Khartoum","Barcelona","Johannesburg","Saint Petersburg","Qingdao","Dalian","Washington",
    "Yangon","Alexandria","Jinan","Guadalajara","Sydney","Melbourne","Monterrey","Brasilia",
    "Amman","Recife","Montreal","Hanoi","Casablanca","Accra","Porto Alegre","Kabul",
    "Nairobi","Auckland",
]
countries = [
    "China","India","United States","Indonesia","Pakistan","Brazil","Nigeria","Bangladesh",
    "Russia","Mexico","Japan","Ethiopia","Philippines","Egypt","Vietnam","Turkey",
    "Iran","Germany","Thailand","France","United Kingdom","Italy","Tanzania","South Africa",
    "Myanmar","Kenya","South Korea","Colombia","Spain","Uganda","Argentina","Algeria",
    "Sudan","Ukraine","Iraq","Afghanistan","Poland","Canada","Morocco","Saudi Arabia",
    "Uzbekistan","Peru","Angola","Malaysia","Mozambique","Ghana","Yemen","Nepal",
    "Venezuela","Madagascar","Cameroon","Ivory Coast","Australia","Niger","Sri Lanka","Burkina Faso",
    "Mali","Romania","Malawi","Chile","Kazakhstan","Zambia","Guatemala","Ecuador",
    "Syria","Netherlands","Senegal","Cambodia","Chad","Somalia","Zimbabwe","Guinea",
    "Rwanda","Benin","Burundi","Tunisia","Bolivia","Belgium","Haiti","Cuba",
    "Jordan","Greece","Dominican Republic","Czech Republic","Portugal","Azerbaijan","Sweden","Honduras",
    "Hungary","Belarus",
]
assert len(cities) == 90 and len(countries) == 90
rng = random.Random(20250809)
with open(os.path.join(ROOT, "data", "places.csv"), "w") as f:
    f.write("name,kind,ngram_frequency\n")
    for i, c in enumerate(cities):
        freq = int(9.1e9 / (i + 1) * (1.0 + rng.random() * 0.15))
        f.write(f"{c},city,{freq}\n")
    for i, c in enumerate(countries):
        freq = int(2.4e10 / (i + 1) * (1.0 + rng.random() * 0.15))
        f.write(f"{c},country,{freq}\n")

with open(os.path.join(ROOT, "data", "business_types.txt"), "w") as f:
    f.write("\n".join(["restaurant", "cafe", "bar", "bookstore", "bakery", "hotel"]) + "\n")
with open(os.path.join(ROOT, "data", "event_types.txt"), "w") as f:
    f.write("\n".join([
        "scientific discovery", "natural disaster", "political treaty",
        "military battle", "cultural festival", "archaeological discovery",
    ]) + "\n")
with open(os.path.join(ROOT, "data", "product_types.txt"), "w") as f:
    f.write("\n".join([
        "headphones", "smartphone", "laptop", "smartwatch", "camera",
        "electric kettle", "vacuum cleaner", "air purifier", "coffee machine", "blender",
        "gaming console", "wireless router", "electric scooter", "fitness tracker", "drone",
        "soundbar", "projector", "e-reader", "printer", "monitor",
        "keyboard", "microphone", "power bank", "toaster", "hair dryer",
    ]) + "\n")

# ---- tests/fixtures/itis_species.txt --------------------------------------
# Pipe-delimited tsn|completename rows, ITIS longnames layout. Two-word species
# names with epithets shared across genera, plus a handful of three-word
# (subspecies) rows the loader must skip.
gen_stems = [
    "Nesomys","Penapis","Roncus","Cheumatopsyche","Psychomyiella","Koponeniella",
    "Acanthurus","Barbatula","Calyptra","Dendrelaphis","Eriogonum","Falcaria",
    "Gastrancistrus","Halictus","Icterus","Junonia","Kogia","Lasiurus",
    "Megachile","Notropis","Oecetis","Pardosa","Quedius","Rhagoletis",
    "Sphex","Tetramorium","Uroderma","Vireo","Xylocopa","Zonotrichia",
    "Ameiurus","Bolitoglossa","Crangonyx","Dixella","Eurycea","Fundulus",
    "Gambusia","Hybognathus","Ictalurus","Japygidae","Kinosternon","Lepomis",
    "Micropterus","Noturus","Orconectes","Procambarus","Quiscalus","Rana",
    "Scaphirhynchus","Thamnophis","Umbra","Villosa","Wyeomyia","Xenopus",
    "Yponomeuta","Zygoptera","Ablepharus","Bombus","Catocala","Desmognathus",
]
epithets = [
    "narindaensis","lusitanica","basilice","cingulatus","retortus","brandegeei",
    "americana","borealis","carolinensis","dorsalis","elegans","fasciatus",
    "gracilis","hirsutus","insularis","japonica","kentuckiensis","lateralis",
    "maculatus","nigricans","occidentalis","pallidus","quadratus","rubra",
    "septentrionalis","texanus","unicolor","virginiana","wilsoni","xanthus",
    "alpina","bicolor","communis","debilis","exilis","flavescens",
    "grandis","humilis","intermedius","jucundus","koreanus","longipes",
    "minor","nitidus","obscurus","parvulus","quietus","robustus",
    "sierrae","tenuis","ulmi","velox","wagneri","xenicus",
    "ypsilon","zonatus","affinis","breviceps","concolor","dubius",
    "edwardsii","formosus","glaucus","hesperius","imitans","jamaicensis",
    "klamathensis","littoralis","montanus","neglectus","ornatus","pictus",
    "quercinus","riparius","sagittatus","tristis","undulatus","vernalis",
    "wootoni","xylinus","yumae","zephyrus","arcticus","brunneus",
    "clarus","decorus",
]
rng = random.Random(7)
rows = []
seen = set()
for g in gen_stems:
    eps = rng.sample(epithets, 84)
    for e in eps:
        nm = f"{g} {e}"
        if nm not in seen:
            seen.add(nm)
            rows.append(nm)
# Guarantee the fixture names used by tests.
for nm in ["Nesomys narindaensis", "Penapis lusitanica"]:
    if nm not in seen:
        rows.append(nm)
        seen.add(nm)
assert len(rows) >= 5000, len(rows)
rng.shuffle(rows)
with open(os.path.join(ROOT, "tests", "fixtures", "itis_species.txt"), "w") as f:
    tsn = 100000
    for i, nm in enumerate(rows):
        f.write(f"{tsn + i}|{nm}\n")
        if i % 500 == 0:  # sprinkle subspecies rows the loader must skip
            f.write(f"{tsn + i}9|{nm} ssp. minor\n")

# ---- tests/fixtures/medicines.csv ------------------------------------------
first = ["Altrex","Bevacor","Cortalin","Dexorin","Elvipra","Fenoxat","Gabrion",
         "Histadol","Ivorex","Junaphen","Klorid","Lumirex","Mavoril","Neurazol",
         "Omnipril","Pavutin","Quillora","Rintovex","Solatran","Tevoxin","Ultrafen",
         "Velpora","Womirex","Xanovir","Yutrevol","Zentrixa"]
second = ["Forte Tablet","Plus Syrup","Dex Oil","Berry Transpules","M Granules",
          "XR Capsule","Junior Drops","Rapid Gel","Night Caplets","Duo Spray"]
meds = []
rng = random.Random(11)
for a in first:
    for b in rng.sample(second, 6):
        meds.append(f"{a} {b}")
with open(os.path.join(ROOT, "tests", "fixtures", "medicines.csv"), "w") as f:
    f.write("name\n")
    for m in meds:
        f.write(m + "\n")

# ---- tests/fixtures/mini corpus ------------------------------------------
# 50 pages; page i has centrality (i+1)*10, so equal-frequency binning with
# 10 bins puts pages 5b..5b+4 in bin b. Every section carries BINMARK-<b> so
# scripted mock endpoints can key replies off the difficulty bin.
words = ("river valley harvest festival bridge museum archive garden temple "
         "market causeway library plaza meadow orchard windmill quarry lighthouse "
         "observatory aqueduct").split()
lines_c = []
lines_j = []
rng = random.Random(3)
for i in range(50):
    b = i // 5
    pid = f"P{i:02d}"
    title = f"Chronicle of District {i:02d}"
    paras = []
    for s in range(3):
        body_words = [words[(i * 7 + s * 3 + k) % len(words)] for k in range(40 + (i % 5) * 6)]
        para = " ".join(body_words)
        paras.append(f"## Section {s + 1}\n\nBINMARK-{b} entry {i:02d}-{s}: {para}.")
    preamble = (f"District {i:02d} overview. BINMARK-{b} preamble for page {pid}. "
                f"The district keeps records of {words[i % len(words)]} and {words[(i + 3) % len(words)]}.")
    markdown = preamble + "\n\n" + "\n\n".join(paras) + "\n"
    lines_j.append(json.dumps({"pageid": pid, "title": title, "markdown": markdown}))
    lines_c.append(f"{pid}\t{(i + 1) * 10}")
with open(os.path.join(ROOT, "tests", "fixtures", "mini_corpus.jsonl"), "w") as f:
    f.write("\n".join(lines_j) + "\n")
with open(os.path.join(ROOT, "tests", "fixtures", "mini_centrality.tsv"), "w") as f:
    f.write("\n".join(lines_c) + "\n")

with open(os.path.join(ROOT, "tests", "fixtures", "denylist.txt"), "w") as f:
    f.write("Storyhouse\nGolden Harbor Bistro\n")

print("ok:", len(rows), "species,", len(meds), "medicines")
