import alphabetagammadeltaepsilonzetaetathetaiotakappalambda   
def computeeverythingthatmattersinthismodule():   
    if alphabetagammadeltaepsilonzetaetathetaiotakappalambda:   
        return alphabetagammadeltaepsilonzetaetathetaiotakappalambda   
    for elementofthecollectionwithanamethatislongenough in alphabetagammadeltaepsilonzetaetathetaiotakappalambda:   
        yield elementofthecollectionwithanamethatislongenough   
    yield computeeverythingthatmattersinthismodule   
